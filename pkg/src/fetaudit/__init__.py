"""fetaudit: does a charge-prediction classifier follow the Four Elements
Theory?

The toolkit ships a synthetic, fully labeled corpus generator, a small
model zoo trained from scratch in numpy, a rule-based reference model that
convicts only on complete criminal elements, and three audit pipelines:

* probing        - can a linear probe read criminal elements off the
                   frozen encoder's sentence vectors? (selective)
* perturbation   - does inserting a confusing charge's circumstance flip
                   the prediction? (sensitive)
* ablation       - does deleting one element's sentences move the model
                   toward INNOCENT? (presumption of innocence)
"""
from . import ablate, corpus, metrics, models, perturb, probing, report, synth
from .ablate import (
    AblatedCase,
    AblationSummary,
    ConsistencyResult,
    confidence_summary,
    remove_element,
    run_ablation,
)
from .corpus import (
    INNOCENT,
    AnnotatedCase,
    AnnotatedCaseSet,
    Case,
    CaseSet,
    ELEMENT_KINDS,
    ElementKind,
    SplitRatio,
    load_annotations,
    load_cases,
    merge_innocent,
    save_annotations,
    save_cases,
    segment_check,
)
from .errors import (
    AuditError,
    ConfigError,
    ContractError,
    DataError,
    EmptiedCaseError,
    ParseError,
    PipelineError,
    SpecError,
    StratificationError,
    TrainingDivergedError,
    ValidationError,
)
from .metrics import cohen_kappa, dist_summary, macro_prf, micro_prf
from .models import (
    ChargeDistribution,
    EncoderOutput,
    ModelBundle,
    TrainConfig,
    build_oracle_bundle,
    build_vocab,
    encode,
    evaluate,
    grad_check,
    load_bundle,
    predict,
    register_external_encoder,
    save_bundle,
    train,
)
from .perturb import (
    PerturbationRule,
    PerturbedCase,
    RetentionResult,
    apply_rule,
    builtin_rules,
    run_perturbation,
)
from .probing import ProbeDataset, ProbeModel, ProbeReport, extract_probe_dataset, random_baseline, run_probing, train_probe
from .report import AuditConfig, render_report, run_audit
from .seeds import derive_seed
from .synth import ChargeTemplate, ConfusingPair, SynthSpec, default_synth_spec, generate_synthetic

__version__ = "0.1.0"
