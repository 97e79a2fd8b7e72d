"""Utils for uqnet"""
