# Puts the repository root on sys.path so tests import the uqnet package in place.
