from .metrics import ajsd, amre, jensen_shannon, mean_squared_error_per_slot, nullified_error
from .audit import AuditReport, Violation, audit_dynamic, audit_fixed
from .bounds import (BoundReport, DynamicBoundInputs, FixedBoundInputs, bound_dpba, bound_dpbd,
                     bound_pba, bound_pbd, degenerate_dynamic_inputs, fixed_bound_inputs,
                     harmonic_square)
