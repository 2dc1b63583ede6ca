"""Exception hierarchy. Every error carries a short machine-parseable code."""

from __future__ import annotations


class CfAuditError(Exception):
    code = "error"


class SchemaError(CfAuditError):
    code = "schema"


class CycleError(SchemaError):
    code = "cycle"


class UnknownParentError(SchemaError):
    code = "unknown_parent"


class UnknownAttributeError(CfAuditError, KeyError):
    code = "unknown_attribute"

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class OutOfRangeError(CfAuditError, ValueError):
    code = "out_of_range"


class EmptyConfigurationError(CfAuditError):
    code = "empty_configuration"


class SingularDesignError(CfAuditError):
    code = "singular_design"


class BlankImageError(CfAuditError):
    code = "blank_image"


class DimensionError(CfAuditError, ValueError):
    code = "dimension"


class ConfigError(CfAuditError, ValueError):
    code = "config"


class UnknownRowError(CfAuditError, KeyError):
    code = "unknown_row"


class DegenerateDataError(CfAuditError):
    code = "degenerate_data"


class EmptyInputError(CfAuditError):
    code = "empty_input"


class NonBinaryAttributeError(CfAuditError):
    code = "non_binary_attribute"


class NoFeasibleCheckpointError(CfAuditError):
    code = "no_feasible_checkpoint"


class FormatError(CfAuditError):
    code = "format"
