# app/channel/__init__.py
