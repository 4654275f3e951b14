from abc import ABC, abstractmethod
from dataclasses import asdict, fields
from typing import Any, Dict

import numpy as np


class Record(ABC):
    """Base for the domain dataclasses: validation on construction plus a flat dict view."""

    def __post_init__(self):
        self.validate()

    @abstractmethod
    def validate(self) -> None:
        raise NotImplementedError()

    def as_dict(self) -> Dict[str, Any]:
        """
        Utility function to return dataclass instance as a dict.
        Array fields are summarised by their shape so the dict stays tabular.

        :return:
        """
        original = asdict(self)  # type: ignore[call-overload]
        for field in fields(self):  # type: ignore[arg-type]
            if field.name.startswith("_"):
                del original[field.name]
            elif isinstance(original[field.name], np.ndarray):
                original[field.name] = f"array{original[field.name].shape}"
        return original
