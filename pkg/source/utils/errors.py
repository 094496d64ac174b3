"""
Objective: Exception hierarchy shared by the library and the CLI.

Each error class carries the process exit code the CLI reports for it.
"""


class DyadicToolboxError(Exception):
	exit_code = 1


class VerificationFailure(DyadicToolboxError):
	exit_code = 1


class InputParseError(DyadicToolboxError):
	exit_code = 3

	def __init__(self, message, line_number=None):
		self.line_number = line_number
		if line_number is not None:
			message = f"line {line_number}: {message}"
		super().__init__(message)


class ParameterRangeError(DyadicToolboxError, ValueError):
	exit_code = 4


class LevelRangeError(ParameterRangeError):
	pass


class CapExceededError(DyadicToolboxError):
	exit_code = 5

	def __init__(self, message, terms=None, last_term=None, tail_bound=None):
		super().__init__(message)
		self.terms = terms
		self.last_term = last_term
		self.tail_bound = tail_bound

	def diagnostics(self):
		return {"terms": self.terms, "last_term": self.last_term, "tail_bound": self.tail_bound}


class QuadratureError(DyadicToolboxError):
	exit_code = 6


class NonConvergenceError(DyadicToolboxError):
	exit_code = 6


class ResidualError(DyadicToolboxError):
	exit_code = 7
