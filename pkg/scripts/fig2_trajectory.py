"""Single records under counting and homodyne detection for the 2 vs 4 pair."""

from _common import config, parser

from qhyp.cli import cmd_trajectory


def main():
    args = parser(__doc__, "out/fig2").parse_args()
    for name in ("fig2_counting", "fig2_homodyne"):
        for path in cmd_trajectory(config(name, args), out=args.out, plot=not args.no_svg):
            print(path)


if __name__ == "__main__":
    main()
