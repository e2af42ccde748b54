# app/__main__.py

from app.cli import main


main()
