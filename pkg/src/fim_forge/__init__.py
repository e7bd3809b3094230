"""fim-forge: a toolkit for fill-in-the-middle (FIM) code generation pipelines.

The package covers four stages of a FIM workflow:

* corpus preparation (``fim_forge.corpus``): extract functions from source
  files, filter undocumented ones, deduplicate, and decontaminate against
  evaluation benchmarks;
* sample synthesis (``fim_forge.splitter``): split functions into
  prefix/middle/suffix triples, either rule-based or by parsing LLM
  responses, always enforcing byte-exact reconstruction;
* completion post-processing (``fim_forge.postprocess``): every truncation
  rule used by the common infilling benchmarks plus overlap trimming;
* evaluation (``fim_forge.harness``): assemble candidate programs, execute
  them in a sandbox, and report pass@1 per task kind and strategy.
"""

from fim_forge.corpus import (
    Origin,
    SourceFunction,
    dedup_exact,
    decontaminate,
    filter_documented,
    load_corpus,
)
from fim_forge.harness import (
    Completion,
    EvalResult,
    FimTask,
    Report,
    TaskKind,
    assemble_program,
    build_report,
    compare_strategies,
    evaluate,
    load_benchmark,
    pass_at_1,
)
from fim_forge.postprocess import (
    Strategy,
    apply_strategy,
    remove_overlap_prefix_middle,
    remove_overlap_middle_suffix,
    trim_overlaps,
    truncate_api_call,
    truncate_multi_line,
    truncate_single_line,
    truncate_to_structure,
)
from fim_forge.splitter import (
    FimSample,
    SpanCategory,
    parse_llm_split_response,
    rule_based_samples,
    split_random_span,
    split_syntactic,
    verify_reconstruction,
)

__version__ = "0.1.0"
