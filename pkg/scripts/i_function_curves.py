"""I1(z) and I2(z) on z = m/M in [0.25, 4] at sqrt(a_s^3 n) = 0.01, as CSV."""
import argparse
import sys

from bec_polaron.cli import emit_csv
from bec_polaron.model import DimensionlessContext
from bec_polaron.numerics import McConfig
from bec_polaron.spectrum import DEFAULT_Z_GRID, SpectrumConfig, i_function_curves


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gas-parameter", type=float, default=0.01)
    ap.add_argument("--samples", type=int, default=2**16)
    ap.add_argument("--seed", type=int, default=McConfig.seed)
    ap.add_argument("--output")
    args = ap.parse_args(argv)
    cfg = SpectrumConfig(mc=McConfig(samples=args.samples, seed=args.seed))
    template = DimensionlessContext.from_gas_parameter(args.gas_parameter, 1.0)
    table = i_function_curves(DEFAULT_Z_GRID, template, cfg)
    notes = [f"I1 positive: {int(table.flags['I1_positive'])}", f"I1 max relative step: {table.flags['I1_max_jump']:.4g}"]
    emit_csv(table, {"script": "i_function_curves", "argv": sys.argv[1:] if argv is None else argv}, args.output, notes)


if __name__ == "__main__":
    main()
