# ksl source package
