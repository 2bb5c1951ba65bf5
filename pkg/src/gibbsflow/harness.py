"""Experiment orchestration: multi-seed information-flow runs and studies."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.stats import spearmanr

from . import baselines, charts, datagen, gibbs, iid, nn

log = logging.getLogger(__name__)

ESTIMATORS = ("gibbs", "binning", "kde")
QUANTITIES = ("H_F", "I_X", "I_Y", "I_Xbar")
CONVERGED_LOSS = 1e-3

# name -> (layer sizes, hidden activation)
PRESETS: dict[str, tuple[list[int], str]] = {
    "mlp1": ([1024, 8, 6, 2], "relu"),
    "mlp2": ([1024, 8, 6, 2], "tanh"),
    "mlp3": ([1024, 1, 6, 2], "relu"),
    "mlp4": ([784, 96, 32, 10], "relu"),
    "mlp5": ([784, 96, 32, 10], "tanh"),
    "mlp6": ([784, 32, 96, 10], "relu"),
    "mlp8": ([784, 256, 128, 96, 10], "relu"),
    "mlp9": ([784, 256, 128, 96, 10], "tanh"),
    "mlp10": ([784, 96, 128, 256, 10], "relu"),
    "iid": ([784, 128, 64, 10], "sigmoid"),
}


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class DataConfig:
    kind: str = "synthetic"  # "synthetic" or "idx"
    per_rotation_count: int = 64
    noise_variance: float = 0.1
    data_seed: int = 0
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_size: int | None = None  # random subset of the training file
    test_size: int | None = None
    subset_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("synthetic", "idx"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "idx" and not (self.train_images and self.train_labels):
            raise ValueError("idx datasets need train_images and train_labels")

    @classmethod
    def mnist(cls, root: str | Path, train_size: int | None = None,
              test_size: int | None = None, subset_seed: int = 0) -> "DataConfig":
        root = Path(root)
        return cls(kind="idx",
                   train_images=str(root / "train-images.idx3-ubyte"),
                   train_labels=str(root / "train-labels.idx1-ubyte"),
                   test_images=str(root / "t10k-images.idx3-ubyte"),
                   test_labels=str(root / "t10k-labels.idx1-ubyte"),
                   train_size=train_size, test_size=test_size, subset_seed=subset_seed)

    @property
    def synthetic_spec(self) -> datagen.SyntheticSpec:
        return datagen.SyntheticSpec(self.per_rotation_count, self.noise_variance, self.data_seed)


def load_data(config: DataConfig) -> tuple[datagen.Dataset, datagen.Dataset | None]:
    """Training set and optional held-out set.

    A synthetic held-out set is a fresh draw with the next data seed.
    """
    if config.kind == "synthetic":
        spec = config.synthetic_spec
        return (datagen.generate_synthetic(spec),
                datagen.generate_synthetic(replace(spec, seed=spec.seed + 1)))
    train = datagen.load_idx(config.train_images, config.train_labels)
    if config.train_size:
        train = datagen.subset(train, config.train_size, config.subset_seed)
    test = None
    if config.test_images and config.test_labels:
        test = datagen.load_idx(config.test_images, config.test_labels)
        if config.test_size:
            test = datagen.subset(test, config.test_size, config.subset_seed)
    return train, test


def _train_to_dict(t: nn.TrainConfig) -> dict:
    d = asdict(t)
    d["init"] = {"kind": t.init.kind, "scale": t.init.scale}
    return d


def _train_from_dict(d: dict) -> nn.TrainConfig:
    d = dict(d)
    if "init" in d:
        d["init"] = nn.InitScheme(**d["init"])
    return nn.TrainConfig(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    sizes: tuple[int, ...] = tuple(PRESETS["mlp1"][0])
    activation: str = "relu"
    dataset: DataConfig = field(default_factory=DataConfig)
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eval_every: int = 1
    estimators: tuple[str, ...] = ("gibbs",)
    output_dir: str | None = None
    mi_split: str = "train"  # dataset that defines P(X): "train" or "test"
    num_bins: int = 30
    kde_variance: float = 0.1
    name: str = "mlp1"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}")
        if self.mi_split not in ("train", "test"):
            raise ValueError("mi_split must be 'train' or 'test'")
        nn.Activation.parse(self.activation)

    @classmethod
    def preset(cls, preset_name: str, /, **overrides) -> "ExperimentConfig":
        """Preset architecture with the matching data and training defaults.

        Any field, including ``name``, can be overridden by keyword.
        """
        key = preset_name.lower()
        if key not in PRESETS:
            raise ValueError(f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}")
        sizes, act = PRESETS[key]
        if sizes[0] == 1024:
            base = dict(dataset=DataConfig(),
                        train=nn.TrainConfig("adam", 0.01, 1000, 0, nn.InitScheme.uniform(0.1)),
                        eval_every=1)
        else:
            root = os.environ.get("GIBBSFLOW_MNIST_DIR", "data/mnist")
            base = dict(dataset=DataConfig.mnist(root),
                        train=nn.TrainConfig("adam", 0.001, 50, 128,
                                             nn.InitScheme.truncated_normal(0.1)),
                        eval_every=5)
        base.update(sizes=tuple(sizes), activation=act, name=key)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["sizes"], d["seeds"], d["estimators"] = list(self.sizes), list(self.seeds), list(self.estimators)
        d["dataset"] = asdict(self.dataset)
        d["train"] = _train_to_dict(self.train)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        if "dataset" in d:
            d["dataset"] = DataConfig(**d["dataset"])
        if "train" in d:
            train = d["train"]
            if preset is not None:
                train = {**_train_to_dict(cls.preset(preset).train), **train}
            d["train"] = _train_from_dict(train)
        if preset is not None:
            return cls.preset(preset, **d)
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def build_mlp(self, seed: int) -> nn.Mlp:
        mlp = nn.Mlp.from_sizes(self.sizes, self.activation)
        return nn.init_weights(mlp, self.train.init, seed)

    def write_resolved(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "resolved-config.json"
        path.write_text(self.to_json(), encoding="utf-8")
        return path


# -- traces -----------------------------------------------------------------

@dataclass(frozen=True)
class FlowRow:
    seed: int
    epoch: int
    loss: float
    train_error: float
    test_error: float | None
    estimator: str
    layer: int
    H_F: float
    I_X: float
    I_Y: float
    I_Xbar: float


FLOW_COLUMNS = [f.name for f in fields(FlowRow)]


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


@dataclass
class FlowTrace:
    rows: list[FlowRow] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FLOW_COLUMNS)
        for r in self.rows:
            w.writerow([r.seed, r.epoch, _num(r.loss), _num(r.train_error), _num(r.test_error),
                        r.estimator, r.layer, _num(r.H_F), _num(r.I_X), _num(r.I_Y),
                        _num(r.I_Xbar)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FlowTrace":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != FLOW_COLUMNS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(FlowRow(
                int(rec["seed"]), int(rec["epoch"]), float(rec["loss"]),
                float(rec["train_error"]),
                None if rec["test_error"] == "" else float(rec["test_error"]),
                rec["estimator"], int(rec["layer"]), float(rec["H_F"]), float(rec["I_X"]),
                float(rec["I_Y"]), float(rec["I_Xbar"])))
        return cls(rows)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        return path

    @classmethod
    def read(cls, path: str | Path) -> "FlowTrace":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    def select(self, estimator: str | None = None, layer: int | None = None,
               seed: int | None = None) -> list[FlowRow]:
        return [r for r in self.rows
                if (estimator is None or r.estimator == estimator)
                and (layer is None or r.layer == layer)
                and (seed is None or r.seed == seed)]

    @property
    def layers(self) -> list[int]:
        return sorted({r.layer for r in self.rows})

    @property
    def estimators(self) -> list[str]:
        return sorted({r.estimator for r in self.rows})


def seed_mean(trace: FlowTrace, estimator: str, quantity: str
              ) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Per layer: ``(epochs, mean, min, max)`` of ``quantity`` across seeds."""
    out = {}
    for layer in trace.layers:
        by_epoch: dict[int, list[float]] = {}
        for r in trace.select(estimator, layer):
            by_epoch.setdefault(r.epoch, []).append(getattr(r, quantity))
        if not by_epoch:
            continue
        epochs = np.array(sorted(by_epoch))
        vals = [np.array(by_epoch[e]) for e in epochs]
        out[layer] = (epochs, np.array([v.mean() for v in vals]),
                      np.array([v.min() for v in vals]), np.array([v.max() for v in vals]))
    return out


def converged(trace: FlowTrace, threshold: float = CONVERGED_LOSS) -> FlowTrace:
    """Rows from eval points where the training loss is below ``threshold``."""
    return FlowTrace([r for r in trace.rows if r.loss < threshold], dict(trace.failures))


# -- estimation -------------------------------------------------------------

def estimate_layers(mlp: nn.Mlp, inputs: np.ndarray, labels: np.ndarray, estimator: str,
                    num_bins: int = 30, kde_variance: float = 0.1) -> list[tuple[float, ...]]:
    """``(H_F, I_X, I_Y, I_Xbar)`` for every layer under one estimator."""
    if estimator == "gibbs":
        return [(s.H_F, s.I_X, s.I_Y, s.I_Xbar) for s in gibbs.flow_summary(mlp, inputs, labels)]
    trace = nn.forward(mlp, inputs)
    out = []
    for layer, f in zip(mlp.layers, trace.post):
        if estimator == "binning":
            cfg = baselines.BinningConfig.for_activation(layer.activation, f, num_bins)
            r = baselines.binned_mi(f, labels, cfg)
        elif estimator == "kde":
            r = baselines.kde_mi(f, labels, baselines.KdeConfig(kde_variance))
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        out.append((r.H_T, r.I_X, r.I_Y, gibbs.mi_xbar(r.I_X, r.I_Y)))
    return out


def _run_seed(config: ExperimentConfig, seed: int, train_set: datagen.Dataset,
              test_set: datagen.Dataset | None) -> tuple[list[FlowRow], str | None]:
    mlp = config.build_mlp(seed)
    mi_set = test_set if config.mi_split == "test" and test_set is not None else train_set
    rows: list[FlowRow] = []

    def record(epoch: int, loss: float, train_error: float) -> None:
        test_error = None if test_set is None else nn.evaluate(mlp, test_set.inputs,
                                                               test_set.labels)[1]
        for est in config.estimators:
            values = estimate_layers(mlp, mi_set.inputs, mi_set.labels, est,
                                     config.num_bins, config.kde_variance)
            for layer, (h, ix, iy, ixb) in enumerate(values, start=1):
                rows.append(FlowRow(seed, epoch, loss, train_error, test_error, est, layer,
                                    h, ix, iy, ixb))

    loss, error = nn.evaluate(mlp, train_set.inputs, train_set.labels)
    record(0, loss, error)
    if config.train.epochs == 0:
        return rows, None
    last = config.train.epochs

    def callback(epoch, _mlp, report):
        if epoch % config.eval_every == 0 or epoch == last:
            record(epoch, report.loss, report.train_error)

    try:
        nn.train(mlp, train_set.inputs, train_set.labels, replace(config.train, seed=seed),
                 callback)
    except nn.TrainingDiverged as exc:
        log.warning("seed %d aborted: %s", seed, exc)
        return rows, str(exc)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        nn.save_weights(mlp, out / f"weights-seed{seed}.mlpw")
    return rows, None


def _seed_job(args):
    config, seed, train_set, test_set = args
    return seed, _run_seed(config, seed, train_set, test_set)


def run_flow(config: ExperimentConfig, workers: int = 1) -> FlowTrace:
    """Train every seed and record the selected estimators at each eval point.

    Seeds are independent jobs; their rows are merged sorted by (seed, epoch).
    If ``config.output_dir`` is set, the trace, resolved config and final
    weights are written there.
    """
    train_set, test_set = load_data(config.dataset)
    jobs = [(config, s, train_set, test_set) for s in config.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    else:
        results = [_seed_job(j) for j in jobs]
    trace = FlowTrace()
    for seed, (rows, failure) in sorted(results, key=lambda r: r[0]):
        trace.rows.extend(rows)
        if failure is not None:
            trace.failures[seed] = failure
    trace.rows.sort(key=lambda r: (r.seed, r.epoch))
    if config.output_dir:
        out = Path(config.output_dir)
        config.write_resolved(out)
        trace.write(out / "flow.csv")
        if trace.failures:
            (out / "failures.json").write_text(
                json.dumps({str(k): v for k, v in trace.failures.items()}, indent=2) + "\n")
    return trace


def compare_estimators(config: ExperimentConfig, workers: int = 1) -> FlowTrace:
    """Like ``run_flow`` but requires at least two estimators on shared weights."""
    if len(set(config.estimators)) < 2:
        raise ValueError("comparison needs at least two estimators")
    return run_flow(config, workers)


# -- charts -----------------------------------------------------------------

def emit_charts(trace: FlowTrace, output_dir: str | Path, entropy_cap: float | None = None,
                prefix: str = "") -> list[Path]:
    """One SVG per estimator and quantity, plus a loss/error chart.

    ``entropy_cap`` draws a dashed reference line on the ``I_X`` charts.
    """
    if not trace.rows:
        log.warning("empty trace: no charts written")
        return []
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for est in trace.estimators:
        for q in QUANTITIES:
            series = [charts.Series(f"layer {layer}", ep, mean, lo, hi)
                      for layer, (ep, mean, lo, hi) in seed_mean(trace, est, q).items()]
            hlines = []
            if q == "I_X" and entropy_cap is not None:
                hlines.append((entropy_cap, f"H(X) = {entropy_cap:.2f} bits"))
            chart = charts.Chart(f"{prefix}{q} ({est})", "epoch", "bits", series, hlines,
                                 y_floor=0.0)
            paths.append(charts.write_svg(chart, out / f"{prefix}{est}-{q}.svg"))
    first = {}
    for r in trace.rows:
        first.setdefault((r.seed, r.epoch), r)
    stats = []
    for name in ("loss", "train_error", "test_error"):
        by_epoch: dict[int, list[float]] = {}
        for (seed, epoch), r in first.items():
            v = getattr(r, name)
            if v is not None:
                by_epoch.setdefault(epoch, []).append(v)
        if by_epoch:
            ep = np.array(sorted(by_epoch))
            vals = [np.array(by_epoch[e]) for e in ep]
            stats.append(charts.Series(name, ep, np.array([v.mean() for v in vals]),
                                       np.array([v.min() for v in vals]),
                                       np.array([v.max() for v in vals])))
    chart = charts.Chart(f"{prefix}training", "epoch", "nats / error rate", stats, y_floor=0.0)
    paths.append(charts.write_svg(chart, out / f"{prefix}training.svg"))
    return paths


# -- generalization study ---------------------------------------------------

@dataclass(frozen=True)
class GeneralizationRow:
    setting: int
    epochs: int
    train_accuracy: float
    test_accuracy: float
    I_X_f1: float
    I_Y_f1: float
    I_Xbar_f1: float
    reached_full_train: bool


@dataclass
class GeneralizationResult:
    sweep: str
    rows: list[GeneralizationRow]
    spearman: float | None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f.name for f in fields(GeneralizationRow)])
        for r in self.rows:
            w.writerow([r.setting, r.epochs, _num(r.train_accuracy), _num(r.test_accuracy),
                        _num(r.I_X_f1), _num(r.I_Y_f1), _num(r.I_Xbar_f1),
                        int(r.reached_full_train)])
        return buf.getvalue()


def rank_correlation(x: Iterable[float], y: Iterable[float]) -> float | None:
    """Spearman correlation, or ``None`` when fewer than two points or a constant side."""
    x, y = np.asarray(list(x), float), np.asarray(list(y), float)
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return float(spearmanr(x, y)[0])


def run_generalization(config: ExperimentConfig, sweep: str, values: Iterable[int],
                       seed: int | None = None) -> GeneralizationResult:
    """Train one network per setting until 100% training accuracy or the epoch cap.

    ``sweep="widths"`` uses two hidden layers of the given width;
    ``sweep="train_sizes"`` keeps the architecture and subsamples the training
    set.  ``config.train.epochs`` is the cap; rows that miss 100% are flagged.
    """
    if sweep not in ("widths", "train_sizes"):
        raise ValueError("sweep must be 'widths' or 'train_sizes'")
    seed = config.seeds[0] if seed is None else seed
    full_train, test_set = load_data(config.dataset)
    if test_set is None:
        raise ValueError("the generalization study needs a held-out set")
    rows = []
    for value in values:
        cfg, train_set = config, full_train
        if sweep == "widths":
            cfg = replace(config, sizes=(config.sizes[0], value, value, config.sizes[-1]))
        else:
            train_set = datagen.subset(full_train, value, config.dataset.subset_seed)
        mlp = cfg.build_mlp(seed)
        reports = nn.train(mlp, train_set.inputs, train_set.labels,
                           replace(cfg.train, seed=seed),
                           lambda e, m, r: r.train_error == 0.0)
        f1 = gibbs.flow_summary(mlp, train_set.inputs, train_set.labels)[0]
        test_acc = 1.0 - nn.evaluate(mlp, test_set.inputs, test_set.labels)[1]
        train_acc = 1.0 - reports[-1].train_error
        if train_acc < 1.0:
            log.warning("setting %s stopped at %.4f train accuracy", value, train_acc)
        rows.append(GeneralizationRow(value, len(reports), train_acc, test_acc,
                                      f1.I_X, f1.I_Y, f1.I_Xbar, train_acc == 1.0))
    rho = rank_correlation([r.test_accuracy for r in rows], [r.I_Xbar_f1 for r in rows])
    result = GeneralizationResult(sweep, rows, rho)
    if config.output_dir:
        out = Path(config.output_dir)
        config.write_resolved(out)
        (out / f"generalization-{sweep}.csv").write_text(result.to_csv(), encoding="utf-8")
    return result


# -- i.i.d. diagnostics -----------------------------------------------------

@dataclass(frozen=True)
class CorrelationRow:
    epoch: int
    layer: int  # 0 is the input
    r_same: float
    r_diff: float


@dataclass(frozen=True)
class WeightRow:
    epoch: int
    layer: int
    r_f: float
    fitted_slope: float | None
    expected_slope: float | None


@dataclass
class IidReport:
    correlations: list[CorrelationRow]
    weights: list[WeightRow]
    train_accuracy: float
    matrices: dict[int, np.ndarray] = field(default_factory=dict)

    def correlation_at(self, epoch: int) -> dict[int, CorrelationRow]:
        return {r.layer: r for r in self.correlations if r.epoch == epoch}

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "correlations.csv", out / "weight-conditions.csv"]
        with open(paths[0], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "layer", "r_same", "r_diff"])
            for r in self.correlations:
                w.writerow([r.epoch, r.layer, _num(r.r_same), _num(r.r_diff)])
        with open(paths[1], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "layer", "r_f", "fitted_slope", "expected_slope"])
            for r in self.weights:
                w.writerow([r.epoch, r.layer, _num(r.r_f), _num(r.fitted_slope),
                            _num(r.expected_slope)])
        for layer, m in self.matrices.items():
            path = out / f"correlation-layer{layer}.pgm"
            iid.write_pgm(path, m)
            paths.append(path)
        return paths


def _weight_rows(mlp: nn.Mlp, inputs: np.ndarray, epoch: int, with_slopes: bool
                 ) -> list[WeightRow]:
    rows = []
    trace = nn.forward(mlp, inputs) if with_slopes else None
    for i, layer in enumerate(mlp.layers, start=1):
        if layer.fan_out < 2:
            continue
        if with_slopes:
            prev = trace.inputs if i == 1 else trace.post[i - 2]
            report = iid.weight_conditions(layer.weights, layer.biases, float(prev.mean()))
            rows.append(WeightRow(epoch, i, report.mean_offdiag, report.fitted_slope,
                                  report.expected_slope))
        else:
            rows.append(WeightRow(epoch, i, iid.independence_condition(layer.weights)[1],
                                  None, None))
    return rows


def run_iid(config: ExperimentConfig, checkpoints: Iterable[int] = (),
            matrices: bool = False, seed: int | None = None) -> IidReport:
    """Train one network, tracking weight conditions every epoch.

    Sample correlations on the held-out set are taken at epoch 0, at each
    checkpoint and at the final epoch.  With ``matrices`` the final-epoch
    ``|r|`` matrices are kept for heatmaps.
    """
    seed = config.seeds[0] if seed is None else seed
    train_set, test_set = load_data(config.dataset)
    held_out = test_set if test_set is not None else train_set
    mlp = config.build_mlp(seed)
    last = config.train.epochs
    marks = set(checkpoints) | {0, last}
    corr: list[CorrelationRow] = []
    weights: list[WeightRow] = []

    def snapshot(epoch: int) -> None:
        trace = nn.forward(mlp, held_out.inputs)
        for layer, f in enumerate([trace.inputs] + trace.post):
            a = iid.avg_correlations(f, held_out.labels)
            corr.append(CorrelationRow(epoch, layer, a.r_same, a.r_diff))

    snapshot(0)
    weights.extend(_weight_rows(mlp, train_set.inputs, 0, True))

    def callback(epoch, m, report):
        if epoch in marks:
            snapshot(epoch)
        weights.extend(_weight_rows(m, train_set.inputs, epoch, epoch in marks))

    nn.train(mlp, train_set.inputs, train_set.labels, replace(config.train, seed=seed), callback)
    kept = {}
    if matrices:
        trace = nn.forward(mlp, held_out.inputs)
        for layer, f in enumerate([trace.inputs] + trace.post):
            kept[layer] = iid.correlation_matrix(f, held_out.labels)[0]
    train_error = nn.evaluate(mlp, train_set.inputs, train_set.labels)[1]
    report = IidReport(corr, weights, 1.0 - train_error, kept)
    if config.output_dir:
        config.write_resolved(config.output_dir)
        report.write(config.output_dir)
    return report
