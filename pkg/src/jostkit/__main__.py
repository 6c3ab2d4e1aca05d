"""Module executed when running `python -m jostkit`."""

from . import main


if __name__ == "__main__":
    raise SystemExit(main())
