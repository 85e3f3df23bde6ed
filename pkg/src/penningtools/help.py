import sys

from rich.console import Console
from rich.table import Table

from penningtools.cli import COMMANDS, main

console = Console()


def help():
    table = Table(title=main.__doc__, show_lines=False)
    table.add_column("Command", style="cyan", no_wrap=True)
    table.add_column("Description")
    for name, (_, run) in COMMANDS.items():
        table.add_row(name, run.__doc__)
    console.print(table)
    console.print(
        "Each command is also a subcommand of [bold]penning-tools[/bold]; "
        "run it with [bold]--help[/bold] for its options."
    )
    sys.exit(0)


if __name__ == "__main__":
    help()
