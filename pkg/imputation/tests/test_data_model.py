import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from imputation.data_model import (
    ColumnKind, ColumnSpec, MixedDataset, index_sets, parse_kind, parse_schema_flag, read_csv, read_schema,
    write_csv, write_mask_csv, write_schema,
)
from imputation.exceptions import DataFormatError

C = ColumnKind.continuous()


# --- Temporary-directory base ---
class TmpDirTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path


class MixedDatasetTests(SimpleTestCase):
    def test_mask_follows_missing_values(self):
        d = MixedDataset([[1.0, np.nan], [2.0, 3.0]], (C, C))
        np.testing.assert_array_equal(d.mask, [[True, False], [True, True]])
        self.assertEqual(d.n_missing(), 1)
        self.assertEqual(d.names, ('X1', 'X2'))

    def test_values_are_read_only(self):
        d = MixedDataset([[1.0, 2.0], [3.0, 4.0]], (C, C))
        with self.assertRaises(ValueError):
            d.values[0, 0] = 9.0

    def test_ordinal_out_of_range_rejected(self):
        with self.assertRaises(ValueError):
            MixedDataset([[1.0], [4.0]], (ColumnKind.ordinal(3),))

    def test_non_integer_ordinal_rejected(self):
        with self.assertRaises(ValueError):
            MixedDataset([[1.0], [1.5]], (ColumnKind.ordinal(3),))

    def test_inconsistent_mask_rejected(self):
        with self.assertRaises(ValueError):
            MixedDataset([[1.0], [2.0]], (C,), mask=[[True], [False]])

    def test_too_few_rows_rejected(self):
        with self.assertRaises(ValueError):
            MixedDataset([[1.0, 2.0]], (C, C))

    def test_ordinal_needs_two_levels(self):
        with self.assertRaises(ValueError):
            ColumnKind.ordinal(1)


class IndexSetsTests(SimpleTestCase):
    def test_fully_observed_continuous(self):
        sets = index_sets(MixedDataset([[1.0, 2.0], [3.0, 4.0]], (C, C)))
        self.assertEqual(len(sets.obs_cont), 4)
        self.assertEqual(sets.obs_ord + sets.miss_cont + sets.miss_ord, [])

    def test_all_missing_ordinal_column(self):
        sets = index_sets(MixedDataset([[np.nan]] * 3, (ColumnKind.ordinal(2),)))
        self.assertEqual(sets.miss_ord, [(0, 0), (1, 0), (2, 0)])
        self.assertEqual(sets.total(), 3)

    def test_mixed_enumeration(self):
        d = MixedDataset([[1.5, 1.0], [np.nan, 2.0]], (C, ColumnKind.ordinal(2)))
        sets = index_sets(d)
        self.assertEqual(sets.obs_cont, [(0, 0)])
        self.assertEqual(sets.miss_cont, [(1, 0)])
        self.assertEqual(sets.obs_ord, [(0, 1), (1, 1)])
        self.assertEqual(sets.miss_ord, [])


class SchemaTests(TmpDirTestCase):
    def test_parse_kind_forms(self):
        self.assertEqual(parse_kind('continuous'), C)
        self.assertEqual(parse_kind('c'), C)
        self.assertEqual(parse_kind('ordinal:3'), ColumnKind.ordinal(3))
        self.assertEqual(parse_kind('O4'), ColumnKind.ordinal(4))
        with self.assertRaises(ValueError):
            parse_kind('nominal')

    def test_parse_schema_flag(self):
        self.assertEqual(parse_schema_flag('c, o2,ordinal:5'),
                         [C, ColumnKind.ordinal(2), ColumnKind.ordinal(5)])

    def test_read_schema_file(self):
        path = self.write('schema.txt', 'age,continuous\ngrade,ordinal,3\n')
        self.assertEqual(read_schema(path), [
            ColumnSpec('age', C), ColumnSpec('grade', ColumnKind.ordinal(3))])

    def test_bad_schema_line_names_the_column(self):
        path = self.write('schema.txt', 'age,continuous\ngrade,ordinal,x\n')
        with self.assertRaises(DataFormatError) as ctx:
            read_schema(path)
        self.assertEqual(ctx.exception.row, 2)
        self.assertEqual(ctx.exception.column, 'grade')

    def test_write_schema_round_trip(self):
        d = MixedDataset([[1.0, 2.0], [2.0, 0.5]], (ColumnKind.ordinal(2), C), ('g', 'x'))
        path = self.tmp / 'schema.txt'
        write_schema(d, path)
        self.assertEqual([s.kind for s in read_schema(path)], list(d.kinds))


class CsvTests(TmpDirTestCase):
    def test_one_missing_token(self):
        path = self.write('d.csv', 'a,b\n1,2\n3,NA\n5,6\n')
        d = read_csv(path, [C, C])
        self.assertEqual((d.n, d.p), (3, 2))
        self.assertEqual(int((~d.mask).sum()), 1)
        self.assertFalse(d.mask[1, 1])

    def test_empty_field_is_missing(self):
        d = read_csv(self.write('d.csv', 'a,b\n1,\n3,4\n'), [C, C])
        self.assertFalse(d.mask[0, 1])

    def test_custom_missing_token(self):
        d = read_csv(self.write('d.csv', 'a,b\n1,?\n3,4\n'), [C, C], missing_token='?')
        self.assertEqual(d.n_missing(), 1)

    def test_ordinal_range_error_names_location(self):
        path = self.write('d.csv', 'x,grade\n0.5,1\n0.7,4\n')
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(path, [C, ColumnKind.ordinal(3)])
        self.assertEqual(ctx.exception.row, 2)
        self.assertEqual(ctx.exception.column, 'grade')
        self.assertEqual(ctx.exception.value, '4')
        self.assertIn("row 2", str(ctx.exception))

    def test_unparseable_number(self):
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(self.write('d.csv', 'a\n1\nabc\n'), [C])
        self.assertEqual(ctx.exception.value, 'abc')

    def test_too_many_fields(self):
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(self.write('d.csv', 'a,b\n1,2\n3,4,5\n'), [C, C])
        self.assertEqual(ctx.exception.row, 2)

    def test_extra_field_on_first_row(self):
        # No index column may be inferred from a long first row
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(self.write('d.csv', 'a,b\n1,2,3\n4,5\n'), [C, C])
        self.assertEqual(ctx.exception.row, 1)
        self.assertIn('too many', str(ctx.exception))

    def test_short_row(self):
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(self.write('d.csv', 'a,b\n1,2\n3\n4,5\n'), [C, C])
        self.assertEqual(ctx.exception.row, 2)
        self.assertIn('too few', str(ctx.exception))

    def test_duplicate_header(self):
        with self.assertRaises(DataFormatError) as ctx:
            read_csv(self.write('d.csv', 'a,a\n1,2\n3,4\n'), [C, C])
        self.assertEqual(ctx.exception.column, 'a')

    def test_quoted_comma_is_one_field(self):
        d = read_csv(self.write('d.csv', '"w, kg",b\n1,2\n3,4\n'), [C, C])
        self.assertEqual(d.names, ('w, kg', 'b'))
        np.testing.assert_array_equal(d.values, [[1, 2], [3, 4]])

    def test_schema_width_mismatch(self):
        with self.assertRaises(DataFormatError):
            read_csv(self.write('d.csv', 'a,b\n1,2\n3,4\n'), [C])

    def test_round_trip_mixed_dataset(self):
        rng = np.random.default_rng(3)
        values = np.column_stack([
            rng.normal(size=10),
            rng.exponential(size=10) * 1e-7,
            rng.integers(1, 4, size=10),
            rng.integers(1, 3, size=10),
        ]).astype(float)
        values[2, 0] = np.nan
        values[5, 2] = np.nan
        kinds = (C, C, ColumnKind.ordinal(3), ColumnKind.ordinal(2))
        d = MixedDataset(values, kinds, ('alpha', 'Beta value', 'grade', 'flag'))
        path = self.tmp / 'round.csv'
        write_csv(d, path)
        self.assertTrue(read_csv(path, list(kinds)).equals(d))

    def test_header_preserved_verbatim(self):
        d = MixedDataset([[1.0], [2.0]], (C,), ('Weird Name (kg)',))
        path = self.tmp / 'h.csv'
        write_csv(d, path)
        self.assertEqual(path.read_text().splitlines()[0], 'Weird Name (kg)')

    def test_all_missing_column_written_as_token(self):
        d = MixedDataset([[1.0, np.nan], [2.0, np.nan]], (C, C), ('a', 'b'))
        path = self.tmp / 'm.csv'
        write_csv(d, path, missing_token='NA')
        self.assertEqual(path.read_text().splitlines()[1:], ['1,NA', '2,NA'])

    def test_mask_csv(self):
        d = MixedDataset([[1.0, np.nan], [2.0, 3.0]], (C, C), ('a', 'b'))
        path = self.tmp / 'mask.csv'
        write_mask_csv(d, path)
        self.assertEqual(path.read_text().splitlines(), ['a,b', '1,0', '1,1'])
