"""
Scenario configuration files.

Configurations are nested mappings read from YAML. A user file only lists the keys it changes; it is
deep-merged over the bundled defaults (see :py:func:`flatpt.load_default_config`).
"""
import copy
import logging
import re
from collections.abc import Mapping

from ruamel.yaml import YAML

logger = logging.getLogger(__name__)

_SIZE_RE = re.compile(r'^\s*(\d+(?:\.\d+)?)\s*([kmgt]?)i?b?\s*$', re.IGNORECASE)
_SIZE_UNITS = {'': 0, 'k': 10, 'm': 20, 'g': 30, 't': 40}


class ConfigurationError(ValueError):
    """Raised for invalid or inconsistent scenario configurations"""
    pass


def parse_size(value):
    """
    Parse a byte size given as an integer, a hexadecimal string, or a number with a k, M, G, or T suffix
    (e.g., ``"8G"``, ``"256MB"``, ``"0x200000"``)

    :raises: ConfigurationError if the value cannot be parsed
    """
    if isinstance(value, bool):
        raise ConfigurationError("Invalid size %r" % value)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    text = str(value).strip()
    if text.lower().startswith('0x'):
        try:
            return int(text, 16)
        except ValueError:
            raise ConfigurationError("Invalid size '%s'" % value)
    match = _SIZE_RE.match(text)
    if match is None:
        raise ConfigurationError("Invalid size '%s', expected e.g. 4096, 64k, 2M or 8G" % value)
    number, unit = match.groups()
    size = float(number) * (1 << _SIZE_UNITS[unit.lower()])
    if not size.is_integer():
        raise ConfigurationError("Size '%s' is not a whole number of bytes" % value)
    return int(size)


def format_size(size):
    """Inverse of :py:func:`parse_size` for sizes that are a whole number of k, M, G, or T"""
    for unit, shift in sorted(_SIZE_UNITS.items(), key=lambda x: -x[1]):
        if shift and size >= (1 << shift) and size % (1 << shift) == 0:
            return '%i%s' % (size >> shift, unit.upper())
    return str(size)


def merge_config(base, override):
    """
    Deep-merge ``override`` into a copy of ``base``. Mappings are merged key by key, all other values replace
    the value of base.
    """
    res = copy.deepcopy(dict(base))
    for key, value in (override or {}).items():
        if isinstance(value, Mapping) and isinstance(res.get(key), Mapping):
            res[key] = merge_config(res[key], value)
        else:
            res[key] = copy.deepcopy(value)
    return res


def set_path(config, path, value):
    """Set a nested key given as a dotted path, e.g., ``set_path(cfg, 'layout.scheme', '[18,18]')``"""
    keys = path.split('.')
    node = config
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = node[key] = dict()
        elif not isinstance(child, dict):
            raise ConfigurationError("Cannot set '%s': '%s' is not a section" % (path, key))
        node = child
    node[keys[-1]] = value
    return config


def get_path(config, path, default=None):
    node = config
    for key in path.split('.'):
        if not isinstance(node, Mapping) or key not in node:
            return default
        node = node[key]
    return node


def _plain(value):
    # ruamel returns its own mapping and sequence types
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def read_config(path):
    """
    Read a YAML configuration file

    :raises: ConfigurationError if the file does not hold a mapping
    """
    yaml = YAML(typ='safe')
    with open(path, 'r') as f:
        data = yaml.load(f)
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigurationError("Configuration file %s must hold a mapping, found %s" % (path, type(data).__name__))
    logger.debug("Read configuration %s", path)
    return _plain(data)


def write_config(config, path):
    yaml = YAML()
    yaml.default_flow_style = False
    with open(path, 'w') as f:
        yaml.dump(_plain(config), f)
