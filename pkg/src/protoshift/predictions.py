"""Line-delimited prediction records (TSV, one sample per line).

Records stream one line at a time so arbitrarily large runs never buffer;
float columns use repr so values round-trip exactly and reruns of the same
computation produce byte-identical files.
"""

from pathlib import Path
from typing import Iterable, Iterator

from .engine import Prediction
from .errors import DataFormatError

COLUMNS = (
    "sample_id",
    "predicted_index",
    "predicted_name",
    "zero_shot_index",
    "pre_entropy",
    "post_entropy",
    "fallback",
)


def format_record(pred: Prediction, class_names: list[str]) -> str:
    fields = (
        pred.sample_id,
        str(pred.predicted_class),
        class_names[pred.predicted_class],
        str(pred.zero_shot_class),
        repr(pred.pre_entropy),
        repr(pred.post_entropy),
        "1" if pred.fallback else "0",
    )
    return "\t".join(fields)


def write_predictions(path, predictions: Iterable[Prediction], class_names: list[str]):
    """Stream predictions to a TSV file, yielding each one back."""
    with open(path, "w") as fh:
        fh.write("\t".join(COLUMNS) + "\n")
        for pred in predictions:
            fh.write(format_record(pred, class_names) + "\n")
            yield pred


def read_predictions(path) -> Iterator[Prediction]:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split("\t")) != COLUMNS:
            raise DataFormatError(f"{path}: unexpected prediction header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(COLUMNS):
                raise DataFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} columns")
            try:
                yield Prediction(
                    sample_id=parts[0],
                    predicted_class=int(parts[1]),
                    zero_shot_class=int(parts[3]),
                    pre_entropy=float(parts[4]),
                    post_entropy=float(parts[5]),
                    selected_views=[],
                    fallback=parts[6] == "1",
                )
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
