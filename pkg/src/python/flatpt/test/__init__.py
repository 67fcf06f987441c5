"""
Module with tests for the flatpt address translation simulator
"""
