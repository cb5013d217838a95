#!/usr/bin/env python
"""Command-line entry point: simulate, ampute, impute, benchmark, coverage."""
import os
import sys

BBGC_COMMANDS = ('simulate', 'ampute', 'impute', 'benchmark', 'coverage')


def main():
    """Run a bbgc management command (`python manage.py help <command>` for its flags)."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'bbgc_project.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install requirements.txt in the active "
            "environment before running the bbgc commands."
        ) from exc
    if len(sys.argv) < 2:
        sys.stderr.write(f"usage: manage.py {{{','.join(BBGC_COMMANDS)}}} [options]\n")
        sys.exit(2)
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
