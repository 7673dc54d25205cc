import sys

from fvrlab import cli


def main():
    sys.exit(cli.run(sys.argv[1:]))


if __name__ == "__main__":
    main()
