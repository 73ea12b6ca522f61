"""Globally accessible location for the workbench settings."""

import os
from enum import Enum
from pathlib import Path
from typing import Optional

import toml
from pydantic import BaseModel, Extra, ValidationError, confloat, conint
from typing_extensions import Final

from . import __basepath__
from .log import init_logger, log
from .util import critical_exit

################################################################

# some constants not exposed to the user

DEF_CONFIG_FILE: Final[Path] = __basepath__ / "kacbench.def.toml"
"""Default settings file, used e.g. by CLI to provide the user a skeleton."""

CONFFILE_ENVVAR: Final[str] = "KACBENCH_CONF"
"""Environment variable name to pass or store the settings location."""

LOCAL_CONFIG_FILE: Final[str] = "kacbench.toml"
"""Settings file picked up from the current directory if nothing else is given."""

################################################################
# Models for settings that are available to the user.
# For more info about the fields, see the default TOML file.


class LogLevel(str, Enum):
    """The default logging log levels, as an Enum for parsing."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogConf(BaseModel):
    """Configuration of the used logger."""

    class Config:
        """No unknown fields allowed."""

        extra = Extra.forbid

    level: LogLevel = LogLevel.INFO
    file: Optional[Path] = None


class KacbenchConf(BaseModel):
    """Evaluation budgets and Monte Carlo settings."""

    class Config:
        """No unknown fields allowed."""

        extra = Extra.forbid

    budget: conint(gt=0) = 1_000_000  # type: ignore
    """Cap on enumerated group elements / iterations per point before abstaining."""

    chunk_size: conint(gt=0) = 65536  # type: ignore
    """Monte Carlo samples per chunk (chunk boundaries fix the summation order)."""

    workers: conint(gt=0) = 1  # type: ignore
    """Threads evaluating Monte Carlo chunks (results do not depend on it)."""

    max_abstain_fraction: confloat(ge=0, le=1) = 0.001  # type: ignore
    """Largest tolerated fraction of budget-exceeded evaluations in an estimate."""

    confidence_sigmas: confloat(gt=0) = 3.0  # type: ignore
    """Width (in standard errors) of the acceptance bands of statistical verdicts."""

    hit_radius: conint(gt=0) = 8  # type: ignore
    """Initial radius of hitting windows for cells on sampled systems (doubled as needed)."""

    log: LogConf = LogConf()


class Conf(BaseModel):
    """The complete workbench configuration."""

    class Config:
        """No unknown fields allowed."""

        extra = Extra.forbid

    kacbench: KacbenchConf = KacbenchConf()


_conf: Conf
"""
The actual config variable singleton. We hide it, because once imported
somewhere else, the call-site won't see a redefinition (that we need to do at runtime).
"""


################################################################


def check_config(conf: Conf) -> None:
    """Check configuration for obvious errors and terminate app if they are present."""
    if conf.kacbench.chunk_size < 2:
        critical_exit("kacbench.chunk_size must be at least 2 (per-chunk variances)")


def read_user_config(conffile: Path) -> Conf:
    """Try to parse the given settings file."""
    try:
        userconf = toml.load(conffile)
        ret = Conf().parse_obj(userconf)  # override defaults from user config
        check_config(ret)
        return ret
    except FileNotFoundError:
        critical_exit(f"Configuration file {conffile} does not exist or cannot be opened!")
    except toml.TomlDecodeError as err:
        critical_exit(f"Error while parsing config file {conffile}: {str(err)}")
    except ValidationError as err:
        critical_exit(f"Error while parsing config file {conffile}: {str(err)}")
    raise AssertionError("unreachable")  # make mypy happy


def init_conf(conffile: Optional[Path] = None, quiet: bool = False) -> None:
    """
    Load settings from filename, or else from env variable, or else the built-in defaults.

    This is called by every CLI entry point, to put the passed settings "into the loop".
    """
    global _conf

    init_logger(quiet=quiet)  # bootstrap default logger (re-configured below)

    # If we get a filename passed, it always overrides the env var
    if conffile:
        os.environ[CONFFILE_ENVVAR] = str(conffile)
    # If we get no filename, try to use settings in CWD
    elif Path(LOCAL_CONFIG_FILE).is_file():
        os.environ[CONFFILE_ENVVAR] = LOCAL_CONFIG_FILE

    if CONFFILE_ENVVAR in os.environ:
        log.debug(f"Loading settings from {os.environ[CONFFILE_ENVVAR]}")
        _conf = read_user_config(Path(os.environ[CONFFILE_ENVVAR]))
    else:
        log.debug("No settings passed or found in current directory, using defaults.")
        _conf = Conf()

    logconf = _conf.kacbench.log
    init_logger(logconf.level.value, logconf.file, quiet=quiet)


def conf() -> Conf:
    """
    Access the configuration object only through this function.

    Library use without `init_conf` gets the built-in defaults.
    """
    global _conf
    try:
        _conf
    except NameError:
        _conf = Conf()

    return _conf
