import math
import shutil
import unittest
from pathlib import Path

import numpy as np

from pwevent.datagen import (GridSpec, IngestSchema, ProbabilitySequence, gen_log, gen_sin,
                             gen_tlns, generate, ingest_csv, realize_binary_stream,
                             save_stream_csv)
from pwevent.noise import NoiseSource
from pwevent.utils import import_json


class TestGenerators(unittest.TestCase):
    def test_sin(self):
        p = gen_sin(700).p
        self.assertAlmostEqual(p[0], 0.075 + 0.05 * math.sin(0.01))
        self.assertTrue(np.all(p >= 0.025 - 1e-12) and np.all(p <= 0.125 + 1e-12))

    def test_log(self):
        p = gen_log(1000).p
        self.assertAlmostEqual(p[0], 0.25 / (1 + math.exp(-0.01)))
        self.assertTrue(np.all(np.diff(p) > 0))
        self.assertLess(p[-1], 0.25)

    def test_tlns_without_noise(self):
        sequence = gen_tlns(50, zero_noise=True)
        np.testing.assert_allclose(sequence.p, np.full(50, 0.05))
        self.assertEqual(sequence.clip_count, 0)

    def test_tlns_clip_count(self):
        sequence = gen_tlns(2000, seed=42)
        steps = NoiseSource(42).normal(0.0025, 2000)
        value, clips = 0.05, 0
        for step in steps:
            value += step
            if not 0.0 <= value <= 1.0:
                clips += 1
                value = min(max(value, 0.0), 1.0)
        self.assertEqual(sequence.clip_count, clips)
        self.assertAlmostEqual(sequence.p[-1], value)
        np.testing.assert_array_equal(gen_tlns(2000, seed=42).p, sequence.p)

    def test_tlns_large_steps_clip(self):
        sequence = gen_tlns(500, seed=1, step_std=0.5)
        self.assertGreater(sequence.clip_count, 0)
        self.assertTrue(np.all((sequence.p >= 0) & (sequence.p <= 1)))
        self.assertEqual(sequence.metadata()['clip_count'], sequence.clip_count)

    def test_generate_dispatch(self):
        np.testing.assert_array_equal(generate('SIN', 10, seed=3).p, gen_sin(10).p)
        np.testing.assert_array_equal(generate('tlns', 10, seed=3).p, gen_tlns(10, seed=3).p)
        with self.assertRaises(ValueError):
            generate('walk', 10)
        with self.assertRaises(ValueError):
            gen_sin(0)
        with self.assertRaises(ValueError):
            ProbabilitySequence(np.array([0.5, 1.5]), 'bad')


class TestBinaryStream(unittest.TestCase):
    def test_extreme_probabilities(self):
        zeros = realize_binary_stream(ProbabilitySequence(np.zeros(5), 'flat'), 20, seed=1)
        ones = realize_binary_stream(ProbabilitySequence(np.ones(5), 'flat'), 20, seed=1)
        self.assertEqual(len(zeros), 5)
        np.testing.assert_array_equal(zeros[4].histogram(), [20, 0])
        np.testing.assert_array_equal(ones[2].histogram(), [0, 20])
        with self.assertRaises(ValueError):
            realize_binary_stream(gen_sin(5), 0)

    def test_seeded(self):
        first = realize_binary_stream(gen_sin(10), 50, seed=4)
        second = realize_binary_stream(gen_sin(10), 50, seed=4)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.assignments, b.assignments)


class TestIngest(unittest.TestCase):
    def setUp(self):
        self.test_dir = Path("./test_ingest")
        self.test_dir.mkdir(parents=True, exist_ok=True)
        self.schema = IngestSchema('user', 'time', category_col='category')

    def tearDown(self):
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def write(self, name, text):
        path = self.test_dir / name
        path.write_text(text)
        return path

    def test_category_rows(self):
        path = self.write("checkins.csv",
                          "user,time,category\na,0,x\nb,0,y\na,1,y\na,1.5,x\nc,,x\n")
        result = ingest_csv(path, self.schema, slot_width=1)
        self.assertEqual(result.counters, {'parsed': 5, 'bucketed': 3, 'skipped': 1,
                                           'out_of_box': 0, 'deduplicated': 1})
        self.assertEqual(result.categories, {'x': 0, 'y': 1})
        self.assertEqual(result.users, ['a', 'b'])
        self.assertEqual(result.d, 2)
        np.testing.assert_array_equal(result.batches[0].assignments, [0, 1])
        np.testing.assert_array_equal(result.batches[1].assignments, [0, -1])

    def test_category_order_counts_duplicates(self):
        path = self.write("dupes.csv", "user,time,category\na,0,z\na,0.5,x\nb,0,y\n")
        result = ingest_csv(path, self.schema, slot_width=1)
        self.assertEqual(result.categories, {'z': 0, 'x': 1, 'y': 2})
        self.assertEqual(result.d, 3)
        self.assertEqual(result.counters['deduplicated'], 1)
        np.testing.assert_array_equal(result.batches[0].assignments, [1, 2])

    def test_category_map_persists(self):
        sidecar = self.test_dir / "categories.json"
        first = self.write("first.csv", "user,time,category\na,0,x\nb,0,y\n")
        second = self.write("second.csv", "user,time,category\na,0,z\nb,0,y\n")
        ingest_csv(first, self.schema, 1, category_map_path=sidecar)
        result = ingest_csv(second, self.schema, 1, category_map_path=sidecar)
        self.assertEqual(result.categories, {'x': 0, 'y': 1, 'z': 2})
        self.assertEqual(import_json(sidecar), {'x': 0, 'y': 1, 'z': 2})
        np.testing.assert_array_equal(result.batches[0].assignments, [2, 1])

    def test_datetime_slots(self):
        path = self.write("times.csv", "user,time,category\n"
                                       "a,2024-01-01 00:00:00,x\n"
                                       "b,2024-01-01 00:00:59,x\n"
                                       "a,2024-01-01 00:01:00,y\n")
        result = ingest_csv(path, self.schema, slot_width=60)
        self.assertEqual(len(result.batches), 2)
        np.testing.assert_array_equal(result.batches[1].assignments, [1, -1])

    def test_geo_rows(self):
        schema = IngestSchema('user', 'time', lon_col='lon', lat_col='lat',
                              grid=GridSpec(0.0, 10.0, 0.0, 10.0, g=2))
        path = self.write("geo.csv", "user,time,lon,lat\na,0,1,1\nb,0,6,9\nc,0,11,5\na,1,10,10\n")
        result = ingest_csv(path, schema, slot_width=1)
        self.assertEqual(result.d, 4)
        self.assertEqual(result.counters['out_of_box'], 1)
        self.assertIsNone(result.categories)
        np.testing.assert_array_equal(result.batches[0].assignments, [0, 3])
        np.testing.assert_array_equal(result.batches[1].assignments, [3, -1])

    def test_empty_file(self):
        result = ingest_csv(self.write("empty.csv", ""), self.schema, 1)
        self.assertEqual(result.batches, [])
        self.assertEqual(result.counters['parsed'], 0)

    def test_bad_input(self):
        with self.assertRaises(ValueError):
            IngestSchema('user', 'time')
        with self.assertRaises(ValueError):
            IngestSchema('user', 'time', category_col='c', lon_col='lon')
        with self.assertRaises(ValueError):
            IngestSchema('user', 'time', lon_col='lon', lat_col='lat')
        path = self.write("columns.csv", "user,time,kind\na,0,x\n")
        with self.assertRaises(ValueError):
            ingest_csv(path, self.schema, 1)
        with self.assertRaises(ValueError):
            ingest_csv(path, self.schema, 0)
        with self.assertRaises(OSError):
            ingest_csv(self.test_dir / "missing.csv", self.schema, 1)

    def test_saved_stream_round_trip(self):
        sequence = gen_sin(20)
        batches = realize_binary_stream(sequence, 15, seed=2)
        path = self.test_dir / "sin.csv"
        manifest = import_json(save_stream_csv(batches, path, sequence.metadata()))
        self.assertEqual(manifest['rows'], 300)
        self.assertEqual(manifest['kind'], 'sin')
        result = ingest_csv(path, IngestSchema('user', 'slot', category_col='value'), 1)
        values = {bucket: int(name) for name, bucket in result.categories.items()}
        self.assertEqual(len(result.batches), 20)
        for original, loaded in zip(batches, result.batches):
            np.testing.assert_array_equal([values[b] for b in loaded.assignments],
                                          original.assignments)


class TestGridSpec(unittest.TestCase):
    def test_cells(self):
        grid = GridSpec(0.0, 10.0, 0.0, 10.0, g=2)
        np.testing.assert_array_equal(grid.cells([1, 6, 10, 11, 4], [1, 1, 10, 5, -1]),
                                      [0, 1, 3, -1, -1])
        self.assertEqual(grid.d, 4)

    def test_invalid_bounds(self):
        with self.assertRaises(ValueError):
            GridSpec(1.0, 1.0, 0.0, 2.0)
        with self.assertRaises(ValueError):
            GridSpec(0.0, 1.0, 0.0, 2.0, g=0)


if __name__ == "__main__":
    unittest.main()
