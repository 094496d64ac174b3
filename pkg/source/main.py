"""
Objective: Command-line front end of the dyadic diffusion toolbox.

Steps:
1. Global flags resolve into a RunConfig (flags > environment > defaults).
2. Every command parses its points as decimal strings, rounds them to binary
   at --digits and echoes the rounding it applied.
3. Results go to stdout (or --output) as a YAML document or a CSV table;
   logs go to stderr. Toolbox errors exit with their own status code.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import click

from utils import config
from utils.dyadic_core import DyadicInterval, DyadicPoint, dyadic_distance, smallest_common_interval
from utils.errors import CapExceededError, DyadicToolboxError, ParameterRangeError, VerificationFailure
from utils.euclidean_gaussian import (
	GaussianParams,
	QUADRATURE_DIMENSIONS,
	rho_closed,
	rho_sq_closed,
	rho_sq_derivative,
	rho_sq_quadrature,
	rho_supremum,
)
from utils.haar_expansion_io import read_expansion, write_expansion
from utils.laplacian_numeric import evolve_pointwise, evolve_spectral, haar_eigenvalue, laplacian_constant
from utils.logger import setup_logging
from utils.report_writer import format_document, format_table
from utils.spectral_metric import (
	DiffusionParams,
	TruncationPolicy,
	ball,
	c_t_s,
	distance_closed,
	distance_spectral,
	kernel_K,
	psi,
	psi_dyadic,
	psi_infinity,
)
from utils.verification import SUITE_NAMES, run_suites

logger = logging.getLogger("utils.cli")

#global params
FORMATS = ("table", "document")


@dataclass(frozen=True)
class RunConfig:
	command: str
	tail_tol: float
	max_depth: int
	max_terms: int
	digits: int
	output_format: Optional[str]
	output: Optional[str]
	seed: int
	jobs: int

	def truncation(self) -> TruncationPolicy:
		return TruncationPolicy(self.tail_tol, self.max_terms, self.max_depth)


class ToolboxGroup(click.Group):
	"""Maps toolbox errors to their exit codes."""

	def invoke(self, ctx):
		try:
			return super().invoke(ctx)
		except DyadicToolboxError as error:
			click.echo(f"error: {error}", err=True)
			if isinstance(error, CapExceededError):
				click.echo(f"diagnostics: {error.diagnostics()}", err=True)
			ctx.exit(error.exit_code)


def _point(text: str, run: RunConfig):
	point, rounding = DyadicPoint.parse(text, run.digits)
	return point, float(rounding)


def _interval_record(I: DyadicInterval) -> dict:
	return {"level": I.level, "index": I.index, "left": float(I.left), "right": float(I.right), "length": I.length}


def _emit(run: RunConfig, natural: str, document: dict = None, rows=None, summary: dict = None):
	"""Write the result in the requested format, falling back to the command's natural one."""
	chosen = run.output_format or natural
	if chosen == "table":
		text = format_table(rows if rows is not None else [document], summary)
	else:
		body = dict(document) if document is not None else {}
		if summary:
			body.setdefault("summary", summary)
		if rows is not None:
			body["rows"] = rows
		body["config"] = asdict(run)
		text = format_document(body)
	if run.output:
		with open(run.output, "w") as f:
			f.write(text)
		logger.info("wrote %s", run.output)
	else:
		click.echo(text, nl=False)


@click.group(cls=ToolboxGroup)
@click.option("--tail-tol", type=float, default=None, help="Absolute bound on discarded series tails [env DYADIC_TAIL_TOL, 1e-12].")
@click.option("--max-depth", type=int, default=None, help="Finest wavelet level enumerated in spectral sums [env DYADIC_MAX_DEPTH, 200].")
@click.option("--max-terms", type=int, default=None, help="Cap on terms of one series [env DYADIC_MAX_TERMS, 100000].")
@click.option("--digits", type=int, default=None, help="Binary digits kept when parsing points [env DYADIC_BINARY_DIGITS, 53].")
@click.option("--format", "output_format", type=click.Choice(FORMATS), default=None, help="Output form; each command has a natural default.")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write the result here instead of stdout.")
@click.option("--seed", type=int, default=config.VERIFY_SEED, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Parallel workers for verify.")
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logs on stderr.")
@click.pass_context
def cli(ctx, tail_tol, max_depth, max_terms, digits, output_format, output, seed, jobs, verbose):
	"""Dyadic diffusion geometry: distances, balls, profiles and heat evolution."""
	setup_logging(verbose)
	config.MAX_LEVEL = config.env_max_level()
	trunc = TruncationPolicy.from_env(tail_tol=tail_tol, max_depth=max_depth, max_terms=max_terms)
	digits = config.env_binary_digits() if digits is None else digits
	if digits < 1:
		raise ParameterRangeError(f"--digits must be >= 1, got {digits}")
	ctx.obj = RunConfig(
		command=ctx.invoked_subcommand or "",
		tail_tol=trunc.tail_tol, max_depth=trunc.max_depth, max_terms=trunc.max_terms,
		digits=digits, output_format=output_format, output=output, seed=seed, jobs=jobs,
	)


@cli.command()
@click.argument("x")
@click.argument("y")
@click.pass_obj
def delta(run, x, y):
	"""Dyadic distance delta(x, y) and the minimal interval I(x, y)."""
	px, rx = _point(x, run)
	py, ry = _point(y, run)
	I = smallest_common_interval(px, py)
	document = {
		"x": float(px), "y": float(py), "rounding_x": rx, "rounding_y": ry,
		"delta": dyadic_distance(px, py),
		"interval": "point" if I is None else _interval_record(I),
	}
	_emit(run, "document", document)


@cli.command()
@click.argument("x")
@click.argument("y")
@click.option("--s", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.option("--method", type=click.Choice(["closed", "spectral", "both"]), default="closed", show_default=True)
@click.pass_obj
def distance(run, x, y, s, t, method):
	"""Diffusion distance d_t(x, y) by the closed profile, the Haar sum, or both."""
	px, rx = _point(x, run)
	py, ry = _point(y, run)
	params, trunc = DiffusionParams(s, t), run.truncation()
	document = {"x": float(px), "y": float(py), "rounding_x": rx, "rounding_y": ry, "s": s, "t": t, "delta": dyadic_distance(px, py)}
	if method in ("closed", "both"):
		document["closed"] = distance_closed(px, py, params, trunc)
	if method in ("spectral", "both"):
		document["spectral"] = distance_spectral(px, py, params, trunc)
	if method == "both":
		document["discrepancy"] = abs(document["closed"] - document["spectral"])
	_emit(run, "document", document)


@cli.command("ball")
@click.argument("x")
@click.option("--r", type=float, required=True)
@click.option("--s", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.pass_obj
def ball_command(run, x, r, s, t):
	"""The diffusion ball B_t(x, r): a dyadic interval or all of R+."""
	px, rx = _point(x, run)
	params, trunc = DiffusionParams(s, t), run.truncation()
	found = ball(px, r, params, trunc)
	document = {"x": float(px), "rounding_x": rx, "r": r, "s": s, "t": t, "psi_infinity": psi_infinity(params, trunc)}
	if found.is_whole_space:
		document["whole_space"] = True
	else:
		i = found.interval.log2_length
		document.update({
			"whole_space": False,
			"interval": _interval_record(found.interval),
			"psi_at_length": psi_dyadic(params, i, trunc),
			"psi_at_parent": psi_dyadic(params, i + 1, trunc),
		})
	_emit(run, "document", document)


@cli.command()
@click.option("--s", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.option("--i-min", type=int, default=-20, show_default=True)
@click.option("--i-max", type=int, default=20, show_default=True)
@click.option("--lam", type=float, multiple=True, help="Extra off-lattice arguments lambda.")
@click.pass_obj
def profile(run, s, t, i_min, i_max, lam):
	"""Rows (i, 2^i, psi_t(2^i)) plus psi_inf and the c_t(s) sandwich."""
	if i_min > i_max:
		raise ParameterRangeError(f"--i-min {i_min} exceeds --i-max {i_max}")
	params, trunc = DiffusionParams(s, t), run.truncation()
	rows = [{"i": i, "lambda": math.ldexp(1.0, i), "psi": psi_dyadic(params, i, trunc), "on_lattice": True} for i in range(i_min, i_max + 1)]
	for value in lam:
		if not value >= 0:
			raise ParameterRangeError(f"--lam must be >= 0, got {value!r}")
		rows.append({"i": None, "lambda": value, "psi": psi(params, value, trunc), "on_lattice": False})
	c = c_t_s(params, trunc)
	summary = {
		"s": s, "t": t, "psi_infinity": psi_infinity(params, trunc), "c_t_s": c,
		"sandwich_low": math.sqrt(2.0) * c, "sandwich_high": 2.0 * c,
	}
	_emit(run, "table", rows=rows, summary=summary)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--s", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.option("--x", "queries", multiple=True, help="Query point; repeatable.")
@click.option("--evolved", type=click.Path(dir_okay=False), default=None, help="Also write the evolved expansion file here.")
@click.pass_obj
def evolve(run, input_path, s, t, queries, evolved):
	"""Heat evolution of a Haar expansion: evolved coefficients and u(x, t) by both routes."""
	trunc = run.truncation()
	expansion = read_expansion(input_path)
	result = evolve_spectral(expansion, s, t)
	function = expansion.to_piecewise()
	rows = []
	for text in queries:
		x, rounding = _point(text, run)
		spectral_value = result.evaluate(x, trunc)
		kernel_value = evolve_pointwise(function, x, s, t, trunc)
		rows.append({
			"x": float(x), "rounding": rounding, "spectral": spectral_value,
			"kernel": kernel_value, "discrepancy": abs(spectral_value - kernel_value),
		})
	if evolved:
		write_expansion(result, evolved, header=f"evolved from {input_path} with s={s!r} t={t!r}")
	elif run.output_format == "table":
		logger.warning("evolved expansion not written; pass --evolved PATH")
	document = {
		"s": s, "t": t,
		"evolved": [
			{"level": I.level, "index": I.index, "coefficient": c}
			for I, c in sorted(result.coefficients.items(), key=lambda item: (item[0].level, item[0].index))
		],
	}
	if result.mean is not None:
		document["mean"] = {"level": result.mean.root.level, "index": result.mean.root.index, "mass": result.mean.mass, "t": result.mean.t}
	_emit(run, "document", document, rows=rows, summary={"s": s, "t": t, "coefficients": len(result.coefficients)})


@cli.command()
@click.argument("suite", type=click.Choice(("all",) + SUITE_NAMES), default="all")
@click.pass_obj
def verify(run, suite):
	"""Run the property suites with fixed seeds; exit 1 if any property fails."""
	results = run_suites(suite, run.truncation(), run.seed, run.jobs)
	failed = [result for result in results if not result.passed]
	summary = {"suite": suite, "seed": run.seed, "passed": len(results) - len(failed), "failed": len(failed)}
	_emit(run, "table", rows=[asdict(result) for result in results], summary=summary)
	if failed:
		raise VerificationFailure(f"{len(failed)} properties failed: " + ", ".join(f"{r.suite}/{r.name}" for r in failed))


@cli.command()
@click.argument("x")
@click.argument("y")
@click.option("--s", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.pass_obj
def kernel(run, x, y, s, t):
	"""Heat kernel K_s(x, y; t) and the bound 2/delta(x, y)."""
	px, rx = _point(x, run)
	py, ry = _point(y, run)
	value = kernel_K(px, py, DiffusionParams(s, t), run.truncation())
	document = {"x": float(px), "y": float(py), "rounding_x": rx, "rounding_y": ry, "s": s, "t": t, "kernel": value}
	if px != py:
		bound = 2.0 / dyadic_distance(px, py)
		document.update({"bound": bound, "within_bound": abs(value) <= bound})
	_emit(run, "document", document)


@cli.command()
@click.option("--level", type=int, required=True)
@click.option("--index", type=int, required=True)
@click.option("--s", type=float, required=True)
@click.pass_obj
def eigen(run, level, index, s):
	"""Eigenvalue of D^s on h_I and the unit-scale constant m_s."""
	trunc = run.truncation()
	I = DyadicInterval(level, index)
	eigenvalue = haar_eigenvalue(I, s, trunc)
	document = {
		"interval": _interval_record(I), "s": s, "eigenvalue": eigenvalue,
		"scaled": eigenvalue * I.length ** s, "m_s": laplacian_constant(s, trunc),
	}
	_emit(run, "document", document)


@cli.command()
@click.option("--r", "radii", type=float, multiple=True, required=True)
@click.option("--t", type=float, required=True)
@click.option("--n", type=int, default=1, show_default=True)
@click.option("--quadrature/--no-quadrature", default=True, show_default=True)
@click.pass_obj
def gaussian(run, radii, t, n, quadrature):
	"""Euclidean profile rho_t: quadrature against the closed form, and its derivative."""
	p = GaussianParams(t, n)
	with_quadrature = quadrature and n in QUADRATURE_DIMENSIONS
	rows = []
	for r in radii:
		row = {"r": r, "rho_sq_closed": rho_sq_closed(r, p), "rho": rho_closed(r, p), "derivative": rho_sq_derivative(r, p)}
		if with_quadrature:
			row["rho_sq_quadrature"] = rho_sq_quadrature(r, p)
			row["discrepancy"] = abs(row["rho_sq_quadrature"] - row["rho_sq_closed"])
		rows.append(row)
	_emit(run, "table", rows=rows, summary={"t": t, "n": n, "rho_supremum": rho_supremum(p)})


def main():
	cli(prog_name="main.py")


if __name__ == "__main__":
	main()
