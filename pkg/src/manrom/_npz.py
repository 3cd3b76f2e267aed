"""Deterministic .npz writing.

``np.savez`` stamps the current time into the zip members, so rerunning an
identical analysis would produce byte-different bundles.  This writer pins
the zip timestamps (and stores uncompressed, like savez) so identical
arrays give identical files.
"""

import io
import zipfile

import numpy as np


def savez_deterministic(path, **arrays):
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in arrays:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arrays[name]),
                                      allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy",
                                   date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())
