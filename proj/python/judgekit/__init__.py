"""Python surface of the judging-orchestration core.

The heavy lifting lives in the compiled ``judgekit._core`` extension; this
package re-exports its operations. Records (questions, answers, votes,
judgments, grades) are plain dicts in the same shapes as the JSONL files the
CLI reads and writes.
"""

from judgekit._core import (
    InputError,
    ParseError,
    TemplateError,
    aggregate_swapped,
    agreement,
    build_repetitive_list_attack,
    classify_probe,
    emit_report,
    extract_numbered_list,
    judge_with_policy,
    mt_bench_score,
    parse_pairwise_verdict,
    parse_single_score,
    position_bias_report,
    render_pairwise_prompt,
    scores_to_votes,
    win_rate,
)

__all__ = [
    "InputError",
    "ParseError",
    "TemplateError",
    "aggregate_swapped",
    "agreement",
    "build_repetitive_list_attack",
    "classify_probe",
    "emit_report",
    "extract_numbered_list",
    "judge_with_policy",
    "mt_bench_score",
    "parse_pairwise_verdict",
    "parse_single_score",
    "position_bias_report",
    "render_pairwise_prompt",
    "scores_to_votes",
    "win_rate",
]
