# app/tests/__init__.py