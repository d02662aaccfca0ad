from .generators import (GENERATORS, ProbabilitySequence, gen_log, gen_sin, gen_tlns, generate,
                         log_probability, realize_binary_stream, save_stream_csv, sin_probability)
from .ingest import GridSpec, IngestResult, IngestSchema, ingest_csv
