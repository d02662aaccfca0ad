from .laplace import (NoiseSource, RngSeed, laplace_from_uniform, laplace_sample,
                      noise_error)
