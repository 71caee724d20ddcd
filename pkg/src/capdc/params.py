"""Converter design record and config-file parsing.

The config format is deliberately dumb: UTF-8 text, one ``key = value`` pair
per line, ``#`` starts a comment, values are plain or scientific-notation
numbers in SI base units (no unit suffixes). Required keys are ``v_dc``,
``n_stages``, ``l_s``, ``c_s``, ``c_f``, ``r_l``, ``f_sw``; ``k_ls`` and
``k_cs`` are optional sizing metadata that the model never consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import MalformedNumber, MissingKey, NonPositiveValue, UnknownKey

REQUIRED_KEYS = ("v_dc", "n_stages", "l_s", "c_s", "c_f", "r_l", "f_sw")
OPTIONAL_KEYS = ("k_ls", "k_cs")


@dataclass(frozen=True)
class ConverterParams:
    """Design record of the converter (Table-style, SI base units).

    ``r_l`` is the total series-stack load; each of the ``n_stages``
    identical stages sees ``r_l / n_stages``. ``r_l = inf`` is the no-load
    sentinel. ``t_sw`` is always derived from ``f_sw``.
    """

    v_dc: float
    n_stages: int
    l_s: float
    c_s: float
    c_f: float
    r_l: float
    f_sw: float
    k_ls: float | None = None
    k_cs: float | None = None

    def __post_init__(self):
        for name in ("v_dc", "l_s", "c_s", "c_f", "r_l", "f_sw"):
            value = getattr(self, name)
            if not (value > 0.0) or math.isnan(value):
                raise NonPositiveValue(name)
            if name != "r_l" and math.isinf(value):
                raise MalformedNumber(name)
        if not isinstance(self.n_stages, int) or self.n_stages < 1:
            raise NonPositiveValue("n_stages")

    @property
    def t_sw(self) -> float:
        return 1.0 / self.f_sw

    @property
    def r_stage(self) -> float:
        return self.r_l / self.n_stages


def per_stage_load(params: ConverterParams) -> float:
    """Load resistance seen by one stage, r_l / n_stages."""
    return params.r_l / params.n_stages


def _parse_number(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedNumber(key) from None
    if math.isnan(value) or math.isinf(value):
        raise MalformedNumber(key)
    return value


def parse_config(text: str) -> ConverterParams:
    """Parse a config document into a validated :class:`ConverterParams`.

    Unknown keys, repeated keys, missing required keys and non-numeric
    values are all rejected.
    """
    values: dict[str, float] = {}
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedNumber(line)
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise UnknownKey(key)
        if key in values:
            raise MalformedNumber(key)
        values[key] = _parse_number(key, value_text)

    for key in REQUIRED_KEYS:
        if key not in values:
            raise MissingKey(key)

    n_raw = values.pop("n_stages")
    if n_raw != int(n_raw):
        raise MalformedNumber("n_stages")
    n_stages = int(n_raw)
    if n_stages < 1:
        raise NonPositiveValue("n_stages")

    for key, value in values.items():
        if key in ("k_ls", "k_cs"):
            continue
        if value <= 0.0:
            raise NonPositiveValue(key)

    return ConverterParams(
        v_dc=values["v_dc"],
        n_stages=n_stages,
        l_s=values["l_s"],
        c_s=values["c_s"],
        c_f=values["c_f"],
        r_l=values["r_l"],
        f_sw=values["f_sw"],
        k_ls=values.get("k_ls"),
        k_cs=values.get("k_cs"),
    )


def to_config_text(params: ConverterParams) -> str:
    """Serialize a record back to the config format (round-trip safe)."""
    lines = [
        f"v_dc = {params.v_dc!r}",
        f"n_stages = {params.n_stages}",
        f"l_s = {params.l_s!r}",
        f"c_s = {params.c_s!r}",
        f"c_f = {params.c_f!r}",
        f"r_l = {params.r_l!r}",
        f"f_sw = {params.f_sw!r}",
    ]
    if params.k_ls is not None:
        lines.append(f"k_ls = {params.k_ls!r}")
    if params.k_cs is not None:
        lines.append(f"k_cs = {params.k_cs!r}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ConverterParams:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def table_i_params() -> ConverterParams:
    """The 16-stage prototype design record used throughout the docs."""
    return ConverterParams(
        v_dc=15.0,
        n_stages=16,
        l_s=230e-9,
        c_s=44e-6,
        c_f=10e-6,
        r_l=180.0,
        f_sw=200e3,
        k_ls=60.0,
        k_cs=40.0,
    )
