from .types import (ABSENT, BudgetQuantityPairs, CountVector, Decision, DynamicRequirement,
                    DynamicRequirements, FixedRequirement, FixedRequirements,
                    PublicationRecord, StreamBatch, Verdict)
from .ledger import BudgetLedger, Phase, ledger_window_sum
from .budgets import collapse_budgets
from .trace import RunTrace
