"""CSV loaders for design/system matrices.

Two layouts are accepted:

* triplet: three columns ``row,col,value`` (integers, integer, float); the
  matrix shape is ``(max row + 1, max col + 1)`` unless given explicitly;
* dense: an ``n x p`` grid of floats.

A file whose rows all have exactly three columns with integral first two
columns is read as a triplet unless ``layout`` says otherwise.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError


def load_matrix_csv(path, layout="auto", shape=None):
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    if layout == "auto":
        is_triplet = (raw.shape[1] == 3
                      and np.allclose(raw[:, 0], np.round(raw[:, 0]))
                      and np.allclose(raw[:, 1], np.round(raw[:, 1])))
        layout = "triplet" if is_triplet else "dense"
    if layout == "dense":
        return raw
    if layout != "triplet":
        raise ConfigError(f"unknown matrix layout {layout!r}")
    rows = raw[:, 0].astype(int)
    cols = raw[:, 1].astype(int)
    if shape is None:
        shape = (rows.max() + 1, cols.max() + 1)
    return sp.csr_matrix((raw[:, 2], (rows, cols)), shape=shape)


def save_matrix_csv(path, A):
    """Triplet layout for sparse input, dense grid otherwise."""
    if sp.issparse(A):
        coo = A.tocoo()
        np.savetxt(path, np.column_stack([coo.row, coo.col, coo.data]),
                   fmt=["%d", "%d", "%.17g"], delimiter=",", header="row,col,value")
    else:
        np.savetxt(path, np.asarray(A), delimiter=",", fmt="%.17g")
