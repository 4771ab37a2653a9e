from dynaconf import Dynaconf, Validator
from pathlib import Path

# 1. Define Paths
PROJECT_ROOT = Path(__file__).parent.parent.parent

# 2. Instantiate Dynaconf
settings = Dynaconf(
    envvar_prefix="QUEUEPULSE",
    settings_files=["config/config.yaml"],
    environments=True,
    load_dotenv=True,
    env_switcher="ENV_FOR_DYNACONF",
    root_path=PROJECT_ROOT,
)

# 3. Define Validation Rules
settings.validators.register(
    Validator("SIMULATION.WORKERS", default=1, gte=1),
    Validator("SIMULATION.BRUTEFORCE_GUARD", default=1_000_000, gte=1),
    Validator("SIMULATION.WARMUP_FRACTION", default=0.01, gte=0.0, lt=1.0),
    Validator("SIMULATION.BATCHES", default=32, gte=2),
    Validator("SIMULATION.NORMAL_THRESHOLD", default=30, gte=2),
    Validator("SIMULATION.ORACLE_TOLERANCE", default=1e-9, gt=0.0),
    Validator("SIMULATION.NETWORK_SERVICE_FACTOR", default=2, gte=1),
    Validator("OUTPUT.DIR", default="results"),
    Validator("LOGGING.LEVEL", default="INFO"),
)

# 4. Trigger Validation
settings.validators.validate()

# --- Helpers ---
def get_env():
    return settings.get("ENV", "development").lower()

# --- Derived / Exported Constants ---
ENV = get_env()

WORKERS = int(settings.SIMULATION.WORKERS)
BRUTEFORCE_GUARD = int(settings.SIMULATION.BRUTEFORCE_GUARD)
WARMUP_FRACTION = float(settings.SIMULATION.WARMUP_FRACTION)
BATCHES = int(settings.SIMULATION.BATCHES)
NORMAL_THRESHOLD = int(settings.SIMULATION.NORMAL_THRESHOLD)
ORACLE_TOLERANCE = float(settings.SIMULATION.ORACLE_TOLERANCE)
NETWORK_SERVICE_FACTOR = int(settings.SIMULATION.NETWORK_SERVICE_FACTOR)

OUTPUT_DIR = settings.OUTPUT.DIR
CORPUS_DIR = PROJECT_ROOT / "config" / "experiments"
