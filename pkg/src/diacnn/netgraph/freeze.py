"""Trainable-flag selection for fine-tuning."""

from __future__ import annotations

from typing import Optional, Sequence, Union

from diacnn.netgraph.graph import ModelSpec
from diacnn.netgraph.params import ParamStore

FREEZE_PRESETS = ("head_only", "all", "last_block")


def _matches(name: str, prefix: str) -> bool:
    return name == prefix or name.startswith(prefix if prefix.endswith(".") else prefix + ".")


def select(params: ParamStore, prefixes: Sequence[str]) -> list[str]:
    return [k for k in params.names() if any(_matches(k, p) for p in prefixes)]


def set_trainable(
    params: ParamStore,
    selector: Union[str, Sequence[str]],
    flag: bool = True,
    model: Optional[ModelSpec] = None,
) -> ParamStore:
    """Update trainable flags in place and return ``params``.

    ``selector`` is either a list of layer-name prefixes (matched parameters
    get ``flag``, the rest are untouched) or one of the presets:

    * ``"all"``: every parameter gets ``flag``.
    * ``"head_only"``: the classification head gets ``flag``, everything else
      the opposite.
    * ``"last_block"``: the last block plus the head get ``flag``, everything
      else the opposite.

    Presets other than ``"all"`` need ``model`` to locate the head.
    """
    if isinstance(selector, str):
        if selector == "all":
            chosen = params.names()
            others: list[str] = []
        elif selector in ("head_only", "last_block"):
            if model is None:
                raise ValueError(f"preset {selector!r} needs the model spec")
            prefixes = list(model.meta.get("head", []))
            if selector == "last_block":
                prefixes.append(model.meta["last_block"])
            chosen = select(params, prefixes)
            others = [k for k in params.names() if k not in set(chosen)]
        else:
            # a bare string that is not a preset is a single prefix
            chosen = select(params, [selector])
            others = []
    else:
        chosen = select(params, list(selector))
        others = []
    if not chosen:
        raise ValueError(f"selector {selector!r} matches no parameter")
    for k in chosen:
        params.params[k].trainable = bool(flag)
    for k in others:
        params.params[k].trainable = not flag
    return params
