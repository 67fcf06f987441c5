"""
Trace-driven simulator of virtual address translation with flattened page tables
"""


def get_defaults_path():
    """
    Internal helper function locating the bundled default scenario configuration

    Uses the installed copy if present and falls back to the repository's spec/ directory when running from a
    source checkout
    """
    # use function level imports here to avoid pulling these functions into the module namespace
    import os
    flatpt_defaults = os.path.join(os.path.dirname(__file__), 'spec', 'flatpt.defaults.yaml')
    # If the package has not been installed but we are running directly from the git repo
    if not os.path.exists(flatpt_defaults):
        flatpt_defaults = os.path.abspath(os.path.join(os.path.dirname(__file__), '../../../spec/',
                                                       'flatpt.defaults.yaml'))
    return flatpt_defaults


def load_default_config():
    """Read the default scenario configuration. Returns a new dict on every call"""
    from .io.config import read_config
    return read_config(get_defaults_path())


# Import the files
from .addressing import PageSize, LevelScheme, NonCanonicalAddressError, decompose, compose  # noqa E402, F401
from .pagetable import MappingSet, LayoutPolicy, Allocator, PageTable, build_table  # noqa E402, F401
from .memhier import MemoryHierarchy, PressureGate, EnergyLedger  # noqa E402, F401
from .walker import TLB, TLBHierarchy, PWCSet, PageWalker  # noqa E402, F401
from .virtwalker import VirtConfig, NestedWalker, nested_translate  # noqa E402, F401
from .recursive import make_recursive_va, recursive_translate  # noqa E402, F401
from .workload import Trace, FragmentationPolicy, generate, layout  # noqa E402, F401
from .runner import Scenario, MetricsReport, run_scenario, compare, sweep, repro  # noqa E402, F401
