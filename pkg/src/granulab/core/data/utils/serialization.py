"""Data conversion helper functions."""
import json
from typing import Any, Callable, Iterable, Optional


def nullable_convert(value: Any, func: Callable[[Any], Any]) -> Any:
    """Convert a value given a conversion function if it is not None.

    Args:
        value: The value to convert.
        func: The conversion function.

    Returns:
        The converted value, or None if the value is None.

    Examples:
        >>> nullable_convert('7', int)
        7
        >>> nullable_convert(None, int) is None
        True
    """
    if value is None:
        return value
    return func(value)


def without_keys(d: dict, keys: set[Any]) -> dict:
    """Remove keys from a dict.

    >>> without_keys({'a': 1, 'b': 2}, {'a'})
    {'b': 2}
    >>> without_keys({'a': 1, 'b': 2}, {'c'}) == {'a': 1, 'b': 2}
    True
    """
    return {k: v for k, v in d.items() if k not in keys}


def parse_literal(text: str) -> Any:
    """Parse a command-line value as a JSON literal, falling back to a string.

    Examples:
        >>> parse_literal('0.5')
        0.5
        >>> parse_literal('[5, 10, 10]')
        [5, 10, 10]
        >>> parse_literal('seeded')
        'seeded'
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(text: str) -> tuple[list[str], Any]:
    """Split a `dotted.path=value` override into its path and parsed value.

    Examples:
        >>> parse_override('sim.dt=0.01')
        (['sim', 'dt'], 0.01)

    Raises:
        ValueError: If the override has no `=` or an empty path.
    """
    path, sep, value = text.partition('=')
    keys = [k for k in path.strip().split('.') if k]
    if not sep or not keys:
        raise ValueError(f'override {text!r} is not of the form section.key=value')
    return keys, parse_literal(value.strip())


def set_dotted(d: dict, keys: list[str], value: Any,
               known: Optional[dict] = None) -> None:
    """Set `d[k1][k2]...[kn] = value`, creating intermediate dicts.

    Args:
        d: The document to update in place.
        keys: The path of keys.
        value: The value to store.
        known: A document of the same shape listing every valid key. If
            given, paths absent from it are rejected.

    Raises:
        KeyError: If `known` is given and the path is not valid.

    Examples:
        >>> doc = {}
        >>> set_dotted(doc, ['sim', 'dt'], 0.01)
        >>> doc
        {'sim': {'dt': 0.01}}
    """
    node = d
    ref = known
    for i, key in enumerate(keys):
        if ref is not None:
            if not isinstance(ref, dict) or key not in ref:
                raise KeyError('.'.join(keys[:i + 1]))
            ref = ref[key]
        if i == len(keys) - 1:
            node[key] = value
        else:
            node = node.setdefault(key, {})


def merge_documents(base: dict, *layers: dict) -> dict:
    """Recursively merge config documents; later layers take precedence.

    Examples:
        >>> merge_documents({'sim': {'dt': 1, 'substeps': 10}}, {'sim': {'dt': 2}})
        {'sim': {'dt': 2, 'substeps': 10}}
    """
    out = {k: (merge_documents(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for layer in layers:
        for k, v in layer.items():
            if isinstance(v, dict) and isinstance(out.get(k), dict):
                out[k] = merge_documents(out[k], v)
            else:
                out[k] = v
    return out


def float_list(values: Iterable[Any]) -> list[float]:
    """Convert an iterable of numbers (or an array) to a list of floats."""
    return [float(v) for v in values]
