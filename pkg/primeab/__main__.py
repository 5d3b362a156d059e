"""Run the toolkit with python -m primeab."""

from .cli import main

if __name__ == "__main__":
    main()
