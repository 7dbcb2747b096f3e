DEFAULT_MAX_STRATEGIES = 64
# strategies scored per iteration, as a multiple of the cap
STRATEGY_POOL_FACTOR = 8
DEFAULT_MAX_QUERIES = 20000
DEFAULT_MAX_ITERATIONS = 50
DEFAULT_MAX_REFINEMENT_ROUNDS = 500

SINK_LOCATION = "sink"

BENCH_DEFAULT_TARGETS = 20
BENCH_DEFAULT_LOCATIONS = 3
BENCH_DEFAULT_ALPHABET_SIZE = 2
BENCH_DEFAULT_MAX_CONSTANT = 3

LOG_LEVEL_ENV = "RERA_LOG_LEVEL"
CORS_ORIGINS_ENV = "RERA_CORS_ORIGINS"
