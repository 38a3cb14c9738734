from .cli import get_cli

if __name__ == "__main__":
    cli = get_cli()

    cli()
