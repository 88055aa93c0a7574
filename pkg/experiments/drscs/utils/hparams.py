class HParams(object):

    def __init__(self, **kwargs):
        self._items = {}
        for k, v in kwargs.items():
            self.__setattr__(k, v)

    def __setattr__(self, key, value):
        super(HParams, self).__setattr__(key, value)

        if key == '_items':
            return

        self._items[key] = value

    def __contains__(self, key):
        return key in self._items

    def __eq__(self, other):
        return isinstance(other, HParams) and self._items == other._items

    def copy(self):
        return HParams(**self._items)

    def items(self):
        return self._items.items()

    def __str__(self):
        return '\n'.join(map(lambda x: str(x[0]) + ': ' + str(x[1]), self._items.items()))

    def to_lines(self):
        """Inverse of parse_lines."""
        return ''.join(f'{k} = {_format_value(v)}\n' for k, v in self._items.items())

    def set(self, key, value):
        """Returns a copy with ``key`` set from a string or an already typed value."""
        hps = self.copy()
        if key not in hps._items:
            raise ValueError("Unknown hyper-parameter: %s" % key)
        hps.__setattr__(key, _coerce(hps._items[key], value) if isinstance(value, str) else value)
        return hps

    def parse(self, str_value):
        hps = self.copy()
        for entry in str_value.strip().split(","):
            entry = entry.strip()
            if not entry:
                continue
            key, sep, value = entry.partition("=")
            if not sep:
                raise ValueError("Unable to parse: %s" % entry)
            hps = hps.set(key.strip(), value.strip())
        return hps

    def parse_lines(self, text):
        """Parses ``key = value`` lines; ``#`` starts a comment, the first ``=`` splits key from value."""
        hps = self.copy()
        for number, line in enumerate(text.splitlines(), 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError("Unable to parse line %d: %s" % (number, line))
            hps = hps.set(key.strip(), value.strip())
        return hps


def _coerce(default_value, value):
    if isinstance(default_value, bool):
        if value.lower() not in ("true", "false"):
            raise ValueError("Expected true/false, got: %s" % value)
        return value.lower() == "true"
    elif isinstance(default_value, int):
        return int(value)
    elif isinstance(default_value, float):
        return float(value)
    elif default_value is None and value.lower() in ("", "none"):
        return None
    return value


def _format_value(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(float(value))
    return '' if value is None else str(value)
