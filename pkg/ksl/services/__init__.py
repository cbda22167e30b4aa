# Exact arithmetic and verification services
