"""Subcommands of the uqnet application, loaded by UQNetApp.load_extensions"""
