"""Equal-mass check: first-order zero-point energy against the Bogoliubov mu_B."""
import argparse

from bec_polaron.model import DimensionlessContext
from bec_polaron.selfenergy import mu_b_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gas-parameter", type=float, default=0.01)
    ap.add_argument("--cutoff", type=float, default=100.0)
    args = ap.parse_args(argv)
    r = mu_b_report(DimensionlessContext.from_gas_parameter(args.gas_parameter, 1.0, cutoff=args.cutoff))
    print(f"E_i(0), cutoff-extrapolated   {r.energy:.12g}")
    print(f"mu_B                          {r.mu_b:.12g}")
    print(f"ratio                         {r.ratio:.12g}")
    print(f"I0 numeric                    {r.i0_numeric:.12g}")
    print(f"I0 closed form                {r.i0_closed:.12g}")
    print(f"E_i(0) with closed-form I0    {r.energy_closed:.12g}")
    print(f"E at cutoff / double cutoff   {r.energy_at_cutoff:.12g} / {r.energy_at_double_cutoff:.12g}")
    print(f"relative drift                {r.cutoff_drift:.3g}")


if __name__ == "__main__":
    main()
