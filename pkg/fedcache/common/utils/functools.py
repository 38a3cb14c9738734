from functools import reduce


def get_nested(storage: dict, *keys):
    """
    Get a value from a nested dictionary.

    Args:
        storage (dict): The dictionary to retrieve the value from.
        *keys (str): The keys of the nested dictionary, in order.

    Returns:
        Any | None: The value of the specified key in the nested dictionary, or None if the key does not exist.
    """
    return reduce(
        lambda value, key: value.get(key, None) if isinstance(value, dict) else None,
        keys,
        storage,
    )


def split_list(value):
    """
    Split a comma separated string into stripped, non-empty items.

    Non-string values are returned unchanged so the helper can sit in front of pydantic list validation.

    Args:
        value (Any): The raw value, typically read from a `key = value` config line.

    Returns:
        Any: A list of strings when `value` is a string, otherwise `value` itself.
    """
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]

    return value
