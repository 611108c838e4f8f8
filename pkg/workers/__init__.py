# workers/__init__.py
"""Worker threads that drain the run queue"""
