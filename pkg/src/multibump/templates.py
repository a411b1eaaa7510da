"""Text templates for run summaries."""

SUMMARY_TEMPLATE = """multibump {version} - {pipeline}{label}
config hash: {config_hash}
verdict: {verdict}

{check_lines}
{error_line}"""


CHECK_LINE = "  [{status:<4}] {name:<22} {eps}{message}"


EXPECTED_FAIL_NOTE = """The eigenfunction construction was flagged unbounded: the component of
{{U > 0}} through the origin reached the x-faces of every enlarged box while
U stayed positive on the line |y| = {line_y:.6g}. This is the expected outcome
of the negative control."""


VERDICT_EXIT_CODES = {
    "PASS": 0,
    "EXPECTED-FAIL": 0,
    "FAIL": 1,
    "UNEXPECTED-PASS": 1,
    "ERROR": 2,
}
