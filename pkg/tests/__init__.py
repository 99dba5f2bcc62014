# Test package for the AUV formation simulator
