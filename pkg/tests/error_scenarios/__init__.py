# Error scenario tests package
