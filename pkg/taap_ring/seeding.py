import zlib

import numpy as np

# Fixed stream keys, one per consumer of randomness
STREAMS = {
    'ensemble': 1,
    'imaging': 2,
    'transport': 3,
    'reproduce': 4
}


def stream_key(stream: str) -> int:
    return STREAMS.get(stream, zlib.crc32(stream.encode()))


def seed_sequence(seed: int, stream: str) -> np.random.SeedSequence:
    """ Seed sequence for one named stream, independent of all other streams """
    return np.random.SeedSequence(entropy=seed, spawn_key=(stream_key(stream),))


def make_rng(seed: int | np.random.SeedSequence, stream: str = 'default') -> np.random.Generator:
    """
    Counter-based generator for a named stream
    :param seed: Scenario seed or an already derived seed sequence
    :param stream: Consumer name, keeps streams of different modules apart
    :return: Philox-backed numpy generator
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else seed_sequence(seed, stream)
    return np.random.Generator(np.random.Philox(ss))


def substreams(seed: int | np.random.SeedSequence, stream: str, n: int) -> list[np.random.Generator]:
    """ n independent generators whose draws do not depend on how they are scheduled """
    ss = seed if isinstance(seed, np.random.SeedSequence) else seed_sequence(seed, stream)
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(n)]
