from .obs import (ObsResult, candidate_errors, inclusion_probabilities, obs, sampling_error,
                  sm_error_upper_bound, total_error)
from .mechanism import sm_disturb, sm_sample
