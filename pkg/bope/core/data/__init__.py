from bope.core.data.dataset import CsvSchema, PricingDataset, load_csv, write_csv
from bope.core.data.instance import EvaluationInstance, apply_target_policy, build_instance
from bope.core.data.policy import LinearGaussianPolicy, TargetPolicySpec

__all__ = [
    "CsvSchema",
    "PricingDataset",
    "load_csv",
    "write_csv",
    "EvaluationInstance",
    "apply_target_policy",
    "build_instance",
    "LinearGaussianPolicy",
    "TargetPolicySpec",
]
