# Verification suites package
