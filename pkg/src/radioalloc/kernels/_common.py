"""Constants shared by both kernel backends."""

SIGMOID = 0
LOGARITHMIC = 1

# demand bisection
DEMAND_FLOOR = 1e-12
DEMAND_CAP = 2.0 ** 30
DEMAND_ABS_TOL = 1e-9
DEMAND_MAX_ITER = 400

# clearing-price search; the price is carried as m * 2**E
PRICE_REL_TOL = 1e-8
PRICE_MAX_BISECT = 200
PRICE_MAX_EXPONENT = 1 << 20

LN2 = 0.6931471805599453


class KernelError(RuntimeError):
    """A kernel failed to bracket or converge."""
