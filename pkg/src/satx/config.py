"""Job configuration: YAML schema, validation, and domain-object building.

The canonical schema is documented in the README.  Unknown keys are
rejected with their full key path; every error names the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import geometry
from .cost import CostCoefficients, TERM_NAMES
from .errors import ConfigError
from .formats import (
    SN3D,
    AmbisonicsSpec,
    ExternalSpec,
    ObjectsSpec,
    VbapSpec,
)
from .geometry import (
    Direction,
    ExplicitSpec,
    FibonacciSpec,
    HemisphereSpec,
    MergeSpec,
    RingSpec,
    SpeakerLayout,
    TDesignSpec,
)

MODES = ("generate", "evaluate", "compare", "apply")
ANALYSIS_MODES = ("incoherent", "coherent")
INIT_KINDS = ("remap", "remap_plus_noise", "random", "given", "reference")

_TOP_KEYS = {
    "mode", "analysis", "name", "input", "output", "cloud",
    "evaluation_cloud", "coefficients", "optimizer", "symmetry", "files",
}
_INPUT_KEYS = {"format", "order", "normalization", "layout", "matrix"}
_OUTPUT_KEYS = {"format", "order", "normalization", "layout", "matrix",
                "virtual_layout"}
_OPT_KEYS = {"init", "scale", "matrix", "seed", "max_iterations",
             "gradient_tolerance", "cost_tolerance", "restarts", "log_every"}
_SYM_KEYS = {"tolerance_deg", "pairs"}
_FILES_KEYS = {"matrix", "audio_in", "audio_out", "out_dir"}

DEFAULT_EVAL_CLOUD = {"kind": "fibonacci", "points": 312, "hemisphere": True}


@dataclass
class OptimizerOptions:
    init: Optional[str] = None
    scale: Optional[float] = None
    matrix: Optional[str] = None
    seed: int = 0
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-7
    cost_tolerance: float = 1e-10
    restarts: int = 1
    log_every: int = 0


@dataclass
class JobConfig:
    mode: str
    analysis: str
    name: str
    input_spec: object
    output_spec: object  # None for plain speaker decoding
    output_layout: Optional[SpeakerLayout]
    cloud_spec: object
    eval_cloud_spec: object
    coeffs: CostCoefficients
    optimizer: OptimizerOptions
    symmetry_tolerance_deg: float = 1.0
    explicit_pairs: Optional[tuple] = None  # label pairs
    files: dict = field(default_factory=dict)


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return node


def _check_keys(node, allowed, path):
    for key in node:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _number(node, path, minimum=None):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    value = float(node)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return value


def _integer(node, path, minimum=None):
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{path}: expected an integer")
    if minimum is not None and node < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return node


def parse_layout(node, path, pair_tol=1.0) -> SpeakerLayout:
    """Named layout, inline [[label, az, el], ...], or {file: path}."""
    try:
        if isinstance(node, str):
            return geometry.named_layout(node, pair_tol)
        if isinstance(node, dict):
            _check_keys(node, {"file", "speakers"}, path)
            if "file" in node:
                with open(node["file"], "r") as handle:
                    data = yaml.safe_load(handle)
                data = _require_mapping(data, f"{path}.file:{node['file']}")
                node = data
            if "speakers" not in node:
                raise ConfigError(f"{path}: layout mapping needs 'speakers'")
            node = node["speakers"]
        if not isinstance(node, list) or not node:
            raise ConfigError(f"{path}: expected a layout name or speaker list")
        speakers = []
        for i, row in enumerate(node):
            if not isinstance(row, list) or len(row) != 3:
                raise ConfigError(f"{path}[{i}]: expected [label, az, el]")
            label, az, el = row
            speakers.append((str(label), Direction(float(az), float(el))))
        return SpeakerLayout(tuple(speakers)).with_detected_pairs(pair_tol)
    except (geometry.GeometryError, OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_cloud(node, path):
    node = _require_mapping(node, path)
    kind = node.get("kind")
    if kind is None:
        raise ConfigError(f"{path}.kind: missing")
    hemisphere = node.get("hemisphere", False)
    if not isinstance(hemisphere, bool):
        raise ConfigError(f"{path}.hemisphere: expected true/false")

    if kind == "tdesign":
        _check_keys(node, {"kind", "points", "hemisphere"}, path)
        spec = TDesignSpec(_integer(node.get("points"), f"{path}.points", 1))
    elif kind == "ring":
        _check_keys(node, {"kind", "points", "hemisphere"}, path)
        spec = RingSpec(_integer(node.get("points"), f"{path}.points", 1))
    elif kind == "fibonacci":
        _check_keys(node, {"kind", "points", "hemisphere"}, path)
        spec = FibonacciSpec(_integer(node.get("points"), f"{path}.points", 1))
    elif kind == "explicit":
        _check_keys(node, {"kind", "directions", "weights", "hemisphere"}, path)
        rows = node.get("directions")
        if not isinstance(rows, list) or not rows:
            raise ConfigError(f"{path}.directions: expected a nonempty list")
        dirs = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != 2:
                raise ConfigError(f"{path}.directions[{i}]: expected [az, el]")
            dirs.append(Direction(float(row[0]), float(row[1])))
        weights = node.get("weights")
        if weights is not None:
            if not isinstance(weights, list) or len(weights) != len(dirs):
                raise ConfigError(f"{path}.weights: one weight per direction")
            weights = tuple(_number(x, f"{path}.weights[{i}]")
                            for i, x in enumerate(weights))
        spec = ExplicitSpec(tuple(dirs), weights)
    elif kind == "layout":
        _check_keys(node, {"kind", "layout", "hemisphere"}, path)
        layout = parse_layout(node.get("layout"), f"{path}.layout")
        spec = ExplicitSpec(layout.directions)
    elif kind == "merge":
        _check_keys(node, {"kind", "parts", "hemisphere"}, path)
        parts = node.get("parts")
        if not isinstance(parts, list) or not parts:
            raise ConfigError(f"{path}.parts: expected a nonempty list")
        built = []
        for i, part in enumerate(parts):
            part = _require_mapping(part, f"{path}.parts[{i}]")
            _check_keys(part, {"weight", "cloud"}, f"{path}.parts[{i}]")
            weight = _number(part.get("weight", 1.0),
                             f"{path}.parts[{i}].weight")
            if weight <= 0:
                raise ConfigError(f"{path}.parts[{i}].weight: must be > 0")
            sub = parse_cloud(part.get("cloud"), f"{path}.parts[{i}].cloud")
            built.append((sub, weight))
        spec = MergeSpec(tuple(built))
    else:
        raise ConfigError(f"{path}.kind: unknown cloud kind {kind!r}")
    if hemisphere:
        spec = HemisphereSpec(spec)
    return spec


def _parse_input(node, path, pair_tol):
    node = _require_mapping(node, path)
    _check_keys(node, _INPUT_KEYS, path)
    fmt = node.get("format")
    if fmt == "ambisonics":
        order = _integer(node.get("order"), f"{path}.order", 0)
        return AmbisonicsSpec(order, node.get("normalization", SN3D))
    if fmt == "vbap":
        if "layout" not in node:
            raise ConfigError(f"{path}.layout: required for vbap input")
        return VbapSpec(parse_layout(node["layout"], f"{path}.layout", pair_tol))
    if fmt == "objects":
        return ObjectsSpec()
    if fmt == "external":
        if "matrix" not in node:
            raise ConfigError(f"{path}.matrix: required for external input")
        return ExternalSpec(str(node["matrix"]))
    raise ConfigError(f"{path}.format: unknown input format {fmt!r}")


def _parse_output(node, path, pair_tol):
    """Returns (output_spec, output_layout)."""
    node = _require_mapping(node, path)
    _check_keys(node, _OUTPUT_KEYS, path)
    fmt = node.get("format")
    if fmt == "speakers":
        if "layout" not in node:
            raise ConfigError(f"{path}.layout: required for speaker output")
        return None, parse_layout(node["layout"], f"{path}.layout", pair_tol)
    if fmt == "ambisonics":
        order = _integer(node.get("order"), f"{path}.order", 0)
        spec = AmbisonicsSpec(order, node.get("normalization", SN3D))
        virt = node.get("virtual_layout")
        if virt is None:
            raise ConfigError(
                f"{path}.virtual_layout: required for ambisonics output"
            )
        if isinstance(virt, dict) and "kind" in virt:
            cloud = geometry.sample_cloud(
                parse_cloud(virt, f"{path}.virtual_layout")
            )
            layout = geometry.layout_from_directions(cloud.directions)
        else:
            layout = parse_layout(virt, f"{path}.virtual_layout", pair_tol)
        return spec, layout
    if fmt == "external":
        if "matrix" not in node or "layout" not in node:
            raise ConfigError(
                f"{path}: external output needs 'matrix' and 'layout'"
            )
        layout = parse_layout(node["layout"], f"{path}.layout", pair_tol)
        return ExternalSpec(str(node["matrix"])), layout
    raise ConfigError(f"{path}.format: unknown output format {fmt!r}")


def _parse_coeffs(node, path) -> CostCoefficients:
    node = _require_mapping(node, path)
    allowed = set(TERM_NAMES) | {"max_boost_db"}
    _check_keys(node, allowed, path)
    values = {}
    for key, value in node.items():
        number = _number(value, f"{path}.{key}")
        if key != "max_boost_db" and number < 0:
            raise ConfigError(f"{path}.{key}: coefficient must be >= 0")
        values[key] = number
    return CostCoefficients(**values)


def _parse_optimizer(node, path) -> OptimizerOptions:
    node = _require_mapping(node, path)
    _check_keys(node, _OPT_KEYS, path)
    opts = OptimizerOptions()
    if "init" in node:
        if node["init"] not in INIT_KINDS:
            raise ConfigError(
                f"{path}.init: unknown strategy {node['init']!r}; "
                f"choose from {INIT_KINDS}"
            )
        opts.init = node["init"]
    if "scale" in node:
        opts.scale = _number(node["scale"], f"{path}.scale", 0.0)
    if "matrix" in node:
        opts.matrix = str(node["matrix"])
    if "seed" in node:
        opts.seed = _integer(node["seed"], f"{path}.seed")
    if "max_iterations" in node:
        opts.max_iterations = _integer(node["max_iterations"],
                                       f"{path}.max_iterations", 1)
    if "gradient_tolerance" in node:
        opts.gradient_tolerance = _number(node["gradient_tolerance"],
                                          f"{path}.gradient_tolerance")
        if opts.gradient_tolerance <= 0:
            raise ConfigError(f"{path}.gradient_tolerance: must be > 0")
    if "cost_tolerance" in node:
        opts.cost_tolerance = _number(node["cost_tolerance"],
                                      f"{path}.cost_tolerance")
        if opts.cost_tolerance <= 0:
            raise ConfigError(f"{path}.cost_tolerance: must be > 0")
    if "restarts" in node:
        opts.restarts = _integer(node["restarts"], f"{path}.restarts", 1)
    if "log_every" in node:
        opts.log_every = _integer(node["log_every"], f"{path}.log_every", 0)
    if opts.init == "given" and not opts.matrix:
        raise ConfigError(f"{path}.matrix: required when init is 'given'")
    return opts


def parse_config(data: dict, source: str = "config") -> JobConfig:
    data = _require_mapping(data, source)
    _check_keys(data, _TOP_KEYS, source)
    mode = data.get("mode", "generate")
    if mode not in MODES:
        raise ConfigError(f"{source}.mode: unknown mode {mode!r}")
    analysis = data.get("analysis", "incoherent")
    if analysis not in ANALYSIS_MODES:
        raise ConfigError(f"{source}.analysis: unknown analysis {analysis!r}")
    name = str(data.get("name", "job"))

    symmetry = data.get("symmetry", {})
    symmetry = _require_mapping(symmetry, f"{source}.symmetry")
    _check_keys(symmetry, _SYM_KEYS, f"{source}.symmetry")
    pair_tol = _number(symmetry.get("tolerance_deg", 1.0),
                       f"{source}.symmetry.tolerance_deg", 0.0)
    explicit_pairs = None
    if "pairs" in symmetry:
        rows = symmetry["pairs"]
        if not isinstance(rows, list):
            raise ConfigError(f"{source}.symmetry.pairs: expected a list")
        pairs = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != 2:
                raise ConfigError(
                    f"{source}.symmetry.pairs[{i}]: expected [label, label]"
                )
            pairs.append((str(row[0]), str(row[1])))
        explicit_pairs = tuple(pairs)

    needs_formats = mode in ("generate", "evaluate", "compare")
    input_spec = output_spec = output_layout = None
    cloud_spec = eval_cloud_spec = None
    if needs_formats:
        if "input" not in data:
            raise ConfigError(f"{source}.input: required for mode {mode}")
        if "output" not in data:
            raise ConfigError(f"{source}.output: required for mode {mode}")
        input_spec = _parse_input(data["input"], f"{source}.input", pair_tol)
        output_spec, output_layout = _parse_output(
            data["output"], f"{source}.output", pair_tol
        )
    if mode == "generate":
        if "cloud" not in data:
            raise ConfigError(f"{source}.cloud: required for mode generate")
        if "coefficients" not in data:
            raise ConfigError(
                f"{source}.coefficients: required for mode generate"
            )
    if "cloud" in data:
        cloud_spec = parse_cloud(data["cloud"], f"{source}.cloud")
    eval_cloud_spec = parse_cloud(
        data.get("evaluation_cloud", DEFAULT_EVAL_CLOUD),
        f"{source}.evaluation_cloud",
    )
    coeffs = _parse_coeffs(data.get("coefficients", {}),
                           f"{source}.coefficients")
    optimizer = _parse_optimizer(data.get("optimizer", {}),
                                 f"{source}.optimizer")
    files = data.get("files", {})
    files = dict(_require_mapping(files, f"{source}.files"))
    _check_keys(files, _FILES_KEYS, f"{source}.files")

    return JobConfig(
        mode=mode,
        analysis=analysis,
        name=name,
        input_spec=input_spec,
        output_spec=output_spec,
        output_layout=output_layout,
        cloud_spec=cloud_spec,
        eval_cloud_spec=eval_cloud_spec,
        coeffs=coeffs,
        optimizer=optimizer,
        symmetry_tolerance_deg=pair_tol,
        explicit_pairs=explicit_pairs,
        files=files,
    )


def load_config(path) -> JobConfig:
    try:
        with open(path, "r") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(data, source="config")
