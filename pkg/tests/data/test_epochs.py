import struct

import numpy as np
import pytest

from uqnet.data.epochs import MAGIC, EpochSet, decode_epochset, encode_epochset, load_epochset, save_epochset
from uqnet.errors import DataError, FormatError


@pytest.fixture
def epochs():
    rng = np.random.default_rng(51)
    return EpochSet(
        data=rng.standard_normal((6, 2, 5)),
        labels=[0, 1, 2, 3, 0, 1],
        subject_ids=[1, 1, 1, 2, 2, 2],
        sampling_rate=250.0,
        channel_names=("C3", "Cz"),
        classes=4,
    )


class TestEpochSet:
    def test_shape_checks(self):
        with pytest.raises(DataError):
            EpochSet(np.zeros((2, 3)), [0, 1], [1, 1], 250.0, ("a", "b", "c"))
        with pytest.raises(DataError):
            EpochSet(np.zeros((2, 1, 4)), [0], [1, 1], 250.0, ("a",))
        with pytest.raises(DataError):
            EpochSet(np.zeros((1, 1, 4)), [3], [1], 250.0, ("a",), classes=2)

    def test_subset_keeps_metadata(self, epochs):
        part = epochs.subset([1, 4])
        assert len(part) == 2
        assert part.labels.tolist() == [1, 0]
        assert part.subject_ids.tolist() == [1, 2]
        assert part.classes == 4
        assert part.channel_names == epochs.channel_names

    def test_subjects_sorted(self, epochs):
        assert epochs.subjects() == [1, 2]


class TestEPOC:
    def test_file_round_trip(self, epochs, tmp_path):
        path = save_epochset(tmp_path / "set.epoc", epochs)
        assert load_epochset(path).equals(epochs)

    def test_header_layout(self, epochs):
        payload = encode_epochset(epochs)
        assert payload[:4] == MAGIC
        assert struct.unpack_from("<H", payload, 4) == (1,)
        assert struct.unpack_from("<IIIHf", payload, 6) == (6, 2, 5, 4, 250.0)

    def test_bad_magic(self, epochs):
        payload = b"XXXX" + encode_epochset(epochs)[4:]
        with pytest.raises(FormatError) as info:
            decode_epochset(payload)
        assert info.value.offset == 0

    def test_bad_version(self, epochs):
        payload = bytearray(encode_epochset(epochs))
        payload[4:6] = struct.pack("<H", 7)
        with pytest.raises(FormatError):
            decode_epochset(bytes(payload))

    def test_length_mismatch_names_the_shape(self, epochs):
        with pytest.raises(FormatError, match=r"6\*2\*5"):
            decode_epochset(encode_epochset(epochs)[:-4])

    def test_trailing_bytes(self, epochs):
        with pytest.raises(FormatError):
            decode_epochset(encode_epochset(epochs) + b"\x00")

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            decode_epochset(MAGIC + b"\x01\x00\x02")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_epochset(tmp_path / "missing.epoc")

    def test_subject_ids_must_fit_a_byte(self):
        epochs = EpochSet(np.zeros((1, 1, 2)), [0], [300], 250.0, ("a",), classes=2)
        with pytest.raises(DataError):
            encode_epochset(epochs)
