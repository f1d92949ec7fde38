import argparse
import logging
import sys

from .server import BridgeConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pfn-bridge",
        description="Serve a tabular regressor over newline-delimited JSON (stdio or TCP).",
    )
    parser.add_argument("--listen", default="stdio", help="'stdio' or host:port")
    parser.add_argument("--model", default="auto",
                        help="auto | tabpfn | rf | ridge (auto prefers tabpfn)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-rows", type=int, default=10_000)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    serve(
        BridgeConfig(
            listen=args.listen,
            model_name=args.model,
            device=args.device,
            max_rows=args.max_rows,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
