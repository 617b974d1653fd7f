"""Per-(replica, particle) random streams.

Each particle owns a PCG64 generator keyed by ``SeedSequence(seed,
spawn_key=(replica, particle_id))``. Its first draws are the initial-condition
uniforms, after which it yields the Brownian normals of successive steps, so a
particle's randomness does not depend on N or on how work is scheduled.
"""

from __future__ import annotations

import numpy as np

N_INIT_UNIFORMS = 5


def particle_generator(seed: int, replica: int, particle_id: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica), int(particle_id)))
    return np.random.Generator(np.random.PCG64(ss))


class ParticleStreams:
    def __init__(self, seed: int, replica: int, ids):
        self.seed = int(seed)
        self.replica = int(replica)
        self.ids = np.asarray(ids, dtype=np.int64)
        self._gens = [particle_generator(seed, replica, i) for i in self.ids]

    def __len__(self):
        return len(self._gens)

    def uniforms(self, k: int) -> np.ndarray:
        """Array (n_particles, k) of U(0, 1) draws, one row per particle."""
        return np.stack([g.random(k) for g in self._gens]) if self._gens else np.zeros((0, k))

    def normals(self, k: int) -> np.ndarray:
        """Array (k, n_particles) of standard normals; row s is step s of the chunk."""
        if not self._gens:
            return np.zeros((k, 0))
        return np.stack([g.standard_normal(k) for g in self._gens], axis=1)
