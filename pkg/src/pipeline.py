"""Experiment orchestrator: config document -> module calls -> one result document."""

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from backend.data_manager import ResultsManager
from backend.models import (
    CONFIG_MODELS,
    CriteriumConfig,
    DbarConfig,
    EstimateConfig,
    ExactConfig,
    GenParamsConfig,
    ModelParamsDocument,
    PhaseTransitionConfig,
    ResultEnvelope,
    SimulateConfig,
)
from src.bounds.corollaries import BaseStepPolicy, corollary1_params, corollary2_params, verify_family
from src.bounds.criterium import create_r_function, minimal_orders, theorem3_check
from src.bounds.lemmas import magnetization_check
from src.cftp.engine import forward_simulate, perfect_sample
from src.cftp.random_stream import RandomnessStream
from src.cftp.trajectory_io import write_csv, write_packed
from src.errors import ConfigError, DominationError, PreconditionError, StateSpaceCapError
from src.estimation.estimators import (
    EstimateReport,
    concentration_empirical,
    estimate_dbar_upper,
    estimate_eta_theta,
    estimate_marginal,
    estimate_phase_gap,
    estimate_phase_gap_kernel,
    stationary_magnetization,
    stationary_pairs,
)
from src.estimation.hoeffding import within_band
from src.exact.coupling import exact_dbar_attractive, maximal_coupling_check, truncation_ledger
from src.exact.transfer import entropy, indicator_plus, ruelle_iterate, stationary, write_distribution_csv
from src.kernels.bk_kernels import FullBK
from src.kernels.kernel_factory import create_kernel, create_params
from src.kernels.params import ModelParams
from src.kernels.symbols import WindowConvention
from src.kernels.table_kernel import TableKernel, random_attractive_table
from src.kernels.weights import create_weights
from src.utils.config_loader import AppSettings, parse_model
from src.utils.logger import get_logger
from src.utils.rationals import qstr, to_q

logger = get_logger(__name__)

Rows = List[Dict[str, Any]]

# Samples longer than this are only written to files
INLINE_SAMPLE_MAX = 64


@dataclass
class RunOptions:
    """CLI overrides; None keeps the config (then settings) value."""

    seed: Optional[int] = None
    workers: Optional[int] = None
    out: Optional[str] = None
    strict_base: bool = False
    finite_only: bool = False
    timing: bool = False
    record: bool = True


@dataclass
class RunOutcome:
    envelope: ResultEnvelope
    rows: Rows = field(default_factory=list)
    wall_clock: float = 0.0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _params(doc: ModelParamsDocument) -> ModelParams:
    return create_params(doc.model_dump())


def _order_text(value: Optional[int]) -> Optional[str]:
    return None if value is None else str(value)


class ExperimentPipeline:
    """
    Runs one experiment config per call.

    Phases:
    1. Validate the config document against its command schema
    2. Run the module operations it names
    3. Write bulk files under out/<experiment id>/
    4. Build the result envelope and record ledger rows
    """

    def __init__(
        self,
        settings: AppSettings,
        options: Optional[RunOptions] = None,
        results: Optional[ResultsManager] = None,
    ):
        """
        Initialize pipeline.

        Args:
            settings: Loaded and validated settings
            options: CLI overrides
            results: Results ledger (None disables recording)
        """
        self.settings = settings
        self.options = options or RunOptions()
        self.results = results
        self._handlers: Dict[str, Callable[[Any], Tuple[Dict[str, Any], Rows]]] = {
            "simulate": self._simulate,
            "dbar": self._dbar,
            "estimate": self._estimate,
            "exact": self._exact,
            "check-criterium": self._check_criterium,
            "gen-params": self._gen_params,
            "phase-transition": self._phase_transition,
        }

    # ========================================================================
    # Entry point
    # ========================================================================

    def run(self, document: Dict[str, Any], command: Optional[str] = None) -> RunOutcome:
        """
        Validate and run one experiment document.

        Args:
            document: Parsed JSON config
            command: Subcommand; must match the document's own command if both are set

        Raises:
            ConfigError: Unknown command or invalid document
        """
        command = command or document.get("command")
        declared = document.get("command")
        if declared is not None and command is not None and declared != command:
            raise ConfigError(f"config is for '{declared}', not '{command}'")
        model_cls = CONFIG_MODELS.get(command)
        if model_cls is None:
            raise ConfigError(f"Unknown command: {command!r}", {"supported": sorted(CONFIG_MODELS)})
        config = parse_model(model_cls, {**document, "command": command}, f"{command} config")

        logger.info("=" * 80)
        logger.info(f"EXPERIMENT {config.id} ({command})")
        logger.info("=" * 80)

        started = time.perf_counter()
        payload, rows = self._handlers[command](config)
        wall_clock = time.perf_counter() - started

        envelope = ResultEnvelope(
            command=command,
            experiment_id=config.id,
            seed=self._seed(config) if self._uses_seed(command) else None,
            payload=payload,
            timing={"wall_clock_seconds": wall_clock} if self.options.timing else None,
        )
        if self.results is not None and self.options.record and rows:
            self.results.record(envelope, rows, wall_clock)

        outcome = RunOutcome(envelope, rows, wall_clock)
        self._print_summary(outcome)
        return outcome

    # ========================================================================
    # Resolution of overrides
    # ========================================================================

    @staticmethod
    def _uses_seed(command: str) -> bool:
        return command in ("simulate", "dbar", "estimate", "phase-transition")

    def _seed(self, config) -> int:
        if self.options.seed is not None:
            return self.options.seed
        if config.seed is not None:
            return config.seed
        return self.settings.runtime.seed

    def _workers(self, config) -> Optional[int]:
        if self.options.workers is not None:
            return self.options.workers
        return config.workers

    def _out_dir(self, config) -> Path:
        base = self.options.out or config.out or self.settings.runtime.out_dir
        return Path(base) / config.id

    # ========================================================================
    # simulate
    # ========================================================================

    def _simulate(self, config: SimulateConfig) -> Tuple[Dict[str, Any], Rows]:
        kernel = create_kernel(config.kernel.descriptor())
        seed = self._seed(config)
        stream = RandomnessStream(seed, config.replicate, "simulate", self.settings.cftp.block_size)

        logger.info(f"\n--- PHASE 1: SIMULATION ({kernel.label}) ---")
        summary: Dict[str, Any]
        if config.window is not None:
            result = perfect_sample(
                kernel,
                config.window,
                stream,
                method=config.method,
                horizon_cap=config.horizon_cap,
                scan_cap=config.scan_cap,
            )
            symbols = list(result.sample)
            start = result.window[0]
            summary = result.to_dict()
            summary["mode"] = "perfect_sample"
        else:
            fwd = config.forward
            symbols = forward_simulate(kernel, fwd.past, fwd.start, fwd.end, stream)
            start = fwd.start
            summary = {"mode": "forward", "past": fwd.past, "window": [fwd.start, fwd.end], "stream": stream.describe()}
        if len(symbols) > INLINE_SAMPLE_MAX:
            summary.pop("sample", None)

        logger.info("\n--- PHASE 2: OUTPUT FILES ---")
        out_dir = self._out_dir(config)
        files = {}
        if "csv" in config.formats:
            path = write_csv(out_dir / "trajectory.csv", start, symbols)
            files["csv"] = {"name": path.name, "sha256": _sha256(path)}
        if "packed" in config.formats:
            path = write_packed(out_dir / "trajectory.bin", symbols)
            files["packed"] = {"name": path.name, "sha256": _sha256(path)}

        mean = float(np.mean(symbols))
        summary.update({"kernel": kernel.label, "length": len(symbols), "mean": mean, "files": files})
        return summary, [{"quantity": "trajectory_mean", "estimate": mean, "replications": 1}]

    # ========================================================================
    # dbar / estimate / phase-transition
    # ========================================================================

    def _dbar(self, config: DbarConfig) -> Tuple[Dict[str, Any], Rows]:
        seed, workers = self._seed(config), self._workers(config)
        results, rows = [], []
        for i, pair in enumerate(config.pairs):
            a, b = create_kernel(pair.a.descriptor()), create_kernel(pair.b.descriptor())
            logger.info(f"\n--- PAIR {i + 1}/{len(config.pairs)}: {a.label} vs {b.label} ---")
            report = estimate_dbar_upper(a, b, config.n, seed, config.confidence, workers)
            entry = {"estimate": report.to_dict(self.options.timing)}
            majorant = report.extra.get("wald_majorant")
            if majorant is not None:
                entry["majorant_holds"] = report.band[0] <= majorant["majorant_upper"]
            if config.exact:
                entry["exact"] = self._exact_dbar(a, b, report)
            results.append(entry)
            rows.append(self._row(report, f"dbar_upper[{i}]"))
        return {"pairs": results}, rows

    @staticmethod
    def _exact_dbar(a, b, report: EstimateReport) -> Dict[str, Any]:
        """Exact d-bar for ordered pairs, checked against the estimate's band."""
        for hi, lo in ((a, b), (b, a)):
            try:
                exact = exact_dbar_attractive(hi, lo)
            except DominationError:
                continue
            except (StateSpaceCapError, PreconditionError) as e:
                return {"available": False, "reason": e.message}
            data = exact.to_dict()
            data["available"] = True
            data["within_band"] = within_band(float(exact.value), report.band)
            return data
        return {"available": False, "reason": "pair is not ordered pointwise"}

    def _estimate(self, config: EstimateConfig) -> Tuple[Dict[str, Any], Rows]:
        seed, workers = self._seed(config), self._workers(config)
        logger.info(f"\n--- PHASE 1: ESTIMATION ({config.quantity}) ---")
        if config.quantity == "concentration":
            params = _params(config.params)
            grid = config.grid or [(config.r, config.k)]
            entries, rows = [], []
            for r, k in grid:
                report = concentration_empirical(params, r, k, config.n, seed, config.confidence, workers)
                payload = report.to_dict(self.options.timing)
                payload["within_bound"] = report.band[0] <= float(report.extra["concentration_rhs_value"])
                entries.append(payload)
                quantity = f"concentration_deviation[r={r},k={k}]" if config.grid else "concentration_deviation"
                rows.append(self._row(report, quantity))
            return self._collect(entries, bool(config.grid), "within_bound"), rows

        kernels = self._estimate_kernels(config)
        listed = len(kernels) > 1 or bool(config.kernels) or config.random_tables is not None
        entries, rows = [], []
        for i, kernel in enumerate(kernels):
            suffix = f"[{i}]" if listed else ""
            if listed:
                logger.info(f"\n--- INSTANCE {i + 1}/{len(kernels)}: {kernel.label} ---")
            if config.quantity == "marginal":
                payload, row = self._marginal_entry(kernel, config, seed, workers)
                rows.append({**row, "quantity": f"marginal_plus{suffix}"})
                entries.append(payload)
                continue
            epsilon = to_q(config.epsilon) if config.epsilon is not None else None
            times = estimate_eta_theta(
                kernel,
                config.n,
                seed,
                m=config.m,
                epsilon=epsilon,
                tail_max=config.tail_max,
                confidence=config.confidence,
                workers=workers,
            )
            payload = times.to_dict(self.options.timing)
            payload["theta_le_eta_checked"] = config.m is None
            entries.append(payload)
            rows += [self._row(times.eta, f"eta{suffix}"), self._row(times.theta, f"theta{suffix}")]
        check = "within_band" if config.quantity == "marginal" else "eta_within_bound"
        return self._collect(entries, listed, check), rows

    def _estimate_kernels(self, config: EstimateConfig) -> List[Any]:
        kernels = [create_kernel(config.kernel.descriptor())] if config.kernel is not None else []
        kernels += [create_kernel(doc.descriptor()) for doc in config.kernels]
        if config.random_tables is not None:
            spec = config.random_tables
            rng = np.random.default_rng(spec.seed)
            for _ in range(spec.count):
                order = int(rng.integers(1, spec.max_order + 1))
                kernels.append(random_attractive_table(order, rng))
        return kernels

    def _marginal_entry(self, kernel, config: EstimateConfig, seed: int, workers: Optional[int]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
        """Marginal and pair estimates, checked against the exact law when it is solvable."""
        report = estimate_marginal(kernel, config.n, seed, config.confidence, workers)
        payload = report.to_dict(self.options.timing)
        exact = stationary_magnetization(kernel)
        if exact is not None:
            plus = (exact + 1) / 2
            payload["exact_marginal_plus"] = qstr(plus)
            payload["within_band"] = within_band(float(plus), report.band)
        pairs = stationary_pairs(kernel)
        if pairs is not None:
            payload["exact_pairs"] = pairs
            payload["pairs_within_band"] = all(
                within_band(pairs[key], tuple(report.extra["pairs"][key]["band"])) for key in pairs
            )
        if isinstance(kernel, TableKernel):
            payload["table"] = kernel.describe()
        return payload, self._row(report, "marginal_plus")

    @staticmethod
    def _collect(entries: List[Dict[str, Any]], listed: bool, check: str) -> Dict[str, Any]:
        """One entry as is; a list with the conjunction of its checks."""
        if not listed:
            return entries[0]
        verdicts = [e.get(check) for e in entries]
        if check == "within_band":
            verdicts += [e.get("pairs_within_band") for e in entries]
        return {"instances": entries, "all_hold": all(v is not False for v in verdicts)}

    def _phase_transition(self, config: PhaseTransitionConfig) -> Tuple[Dict[str, Any], Rows]:
        seed, workers = self._seed(config), self._workers(config)
        logger.info("\n--- PHASE 1: PHASE GAP ---")
        if config.kernel is not None:
            kernel = create_kernel(config.kernel.descriptor())
            report = estimate_phase_gap_kernel(kernel, config.horizon, config.n, seed, config.confidence, workers)
        else:
            report = estimate_phase_gap(
                _params(config.params),
                config.order_cap,
                config.horizon,
                config.n,
                seed,
                config.variant,
                config.confidence,
                workers,
            )
        return report.to_dict(self.options.timing), [self._row(report, "phase_gap")]

    @staticmethod
    def _row(report: EstimateReport, quantity: str) -> Dict[str, Any]:
        row = report.to_row()
        row["quantity"] = quantity
        return row

    # ========================================================================
    # exact
    # ========================================================================

    def _exact(self, config: ExactConfig) -> Tuple[Dict[str, Any], Rows]:
        logger.info(f"\n--- PHASE 1: EXACT ANALYSIS ({config.task}) ---")
        if config.task == "stationary":
            kernel = create_kernel(config.kernel.descriptor())
            if isinstance(kernel, FullBK):
                raise PreconditionError("exact analysis needs a finite-order kernel", {"kernel": kernel.label})
            dist = stationary(kernel)
            order = max(dist.order, 1)
            payload = {
                "kernel": kernel.label,
                "stationary": dist.summary(),
                "entropy_nats": entropy(kernel, dist),
                "ruelle": ruelle_iterate(kernel, indicator_plus(order), order).to_dict(),
            }
            if config.distribution_csv:
                path = write_distribution_csv(dist, self._out_dir(config) / "stationary.csv")
                payload["files"] = {"csv": {"name": path.name, "sha256": _sha256(path)}}
            summary = dist.summary()
            return payload, [{"quantity": "marginal_plus", "estimate": summary["marginal_plus_float"], "value": str(summary["marginal_plus"])}]

        if config.task == "dbar":
            a, b = create_kernel(config.pair.a.descriptor()), create_kernel(config.pair.b.descriptor())
            exact = exact_dbar_attractive(a, b).to_dict()
            return {"a": a.label, "b": b.label, **exact}, [
                {"quantity": "dbar_exact", "estimate": exact["dbar_float"], "value": str(exact["dbar"])}
            ]

        if config.task == "ledger":
            kernel = create_kernel(config.kernel.descriptor())
            table = kernel if isinstance(kernel, TableKernel) else kernel.to_table()
            ledger = truncation_ledger(table, config.k).to_dict()
            return {"kernel": kernel.label, **ledger}, [{"quantity": "truncation_ledger", "value": ledger["verdict"]}]

        params = _params(config.params)
        if config.task == "magnetization":
            checks = [magnetization_check(params, r, k).to_dict() for r, k in config.grid]
            rows = [
                {"quantity": f"magnetization[r={c['r']},k={c['k']}]", "estimate": c["magnetization"], "value": c["outcome"]}
                for c in checks
            ]
            return {"params": params.describe(), "checks": checks}, rows

        checks = [maximal_coupling_check(params, r, k).to_dict() for r, k in config.grid]
        rows = [
            {"quantity": f"maximal_coupling[r={c['r']},k={c['k']}]", "value": str(c["holds"])}
            for c in checks
        ]
        return {"params": params.describe(), "checks": checks}, rows

    # ========================================================================
    # check-criterium / gen-params
    # ========================================================================

    def _policy(self, config: CriteriumConfig) -> BaseStepPolicy:
        if self.options.strict_base:
            return BaseStepPolicy.EXACT
        return BaseStepPolicy(config.policy)

    def _check_criterium(self, config: CriteriumConfig) -> Tuple[Dict[str, Any], Rows]:
        logger.info(f"\n--- PHASE 1: CRITERIUM ({config.family}) ---")
        if config.family == "custom":
            report = theorem3_check(
                _params(config.params),
                create_r_function(config.r.model_dump(exclude_none=True)),
                to_q(config.alpha),
                config.k_max,
                tail_rule=None,
                family="custom",
                require_tail=not (config.finite_only or self.options.finite_only),
            )
        else:
            report = verify_family(config.family, config.c, config.k_max, self._policy(config))
        payload = report.to_dict()
        return payload, [{"quantity": "verdict", "value": report.verdict.value}]

    def _gen_params(self, config: GenParamsConfig) -> Tuple[Dict[str, Any], Rows]:
        logger.info(f"\n--- PHASE 1: PARAMETERS ({config.family}) ---")
        if config.family == "corollary1":
            params = corollary1_params(config.c)
        elif config.family == "corollary2":
            params = corollary2_params(config.c)
        else:
            params = minimal_orders(
                create_weights(config.weights),
                to_q(config.epsilon),
                to_q(config.alpha),
                create_r_function(config.r.model_dump(exclude_none=True)),
                config.k_max,
                WindowConvention(config.convention),
            )
        document = params.describe()
        first = [_order_text(params.orders.exact_or_none(j)) for j in range(1, config.k_max + 2)]

        path = self._out_dir(config) / "params.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, sort_keys=True, indent=2))
        payload = {
            "params": document,
            "first_orders": first,
            "files": {"params": {"name": path.name, "sha256": _sha256(path)}},
        }
        return payload, [{"quantity": f"m[{j + 1}]", "value": m} for j, m in enumerate(first)]

    # ========================================================================
    # Summary
    # ========================================================================

    def _print_summary(self, outcome: RunOutcome) -> None:
        """Log the run summary."""
        envelope = outcome.envelope
        logger.info("\n" + "=" * 80)
        logger.info("EXPERIMENT SUMMARY")
        logger.info("=" * 80)
        logger.info(f"Experiment: {envelope.experiment_id} ({envelope.command})")
        if envelope.seed is not None:
            logger.info(f"Seed: {envelope.seed}")
        logger.info(f"Duration: {outcome.wall_clock:.2f} seconds")
        for row in outcome.rows:
            value = row.get("value") if row.get("value") is not None else row.get("estimate")
            logger.info(f"  - {row['quantity']}: {value}")
        logger.info(f"Payload sha256: {envelope.payload_sha256}")
        logger.info("=" * 80)
