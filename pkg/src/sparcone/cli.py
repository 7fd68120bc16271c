"""Command-line front end (placeholder during bring-up)."""


def main(argv=None):
    raise SystemExit("CLI not wired up yet")
