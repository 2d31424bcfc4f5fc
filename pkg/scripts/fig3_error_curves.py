"""Error curves for the three Rabi-frequency pairs under both detection schemes."""

from _common import config, parser

from qhyp.cli import cmd_error_curve

NAMES = [f"fig3{p}_{kind}" for p in "abc" for kind in ("counting", "homodyne")]


def main():
    p = parser(__doc__, "out/fig3")
    p.add_argument("--only", nargs="*", choices=NAMES, default=NAMES)
    args = p.parse_args()
    for name in args.only:
        files = cmd_error_curve(config(name, args), workers=args.workers, out=args.out, plot=not args.no_svg)
        for path in files:
            print(path)


if __name__ == "__main__":
    main()
