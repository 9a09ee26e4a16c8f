"""Writes data/lih_sto3g_4q.json: the LiH (STO-3G) Hamiltonian on a
2-electron / 2-orbital active space, Jordan-Wigner mapped to 4 qubits.

Requires pyscf. Spin orbitals are interleaved (a0, b0, a1, b1); qubit 0 is
the most significant bit, so pairs (q0 q1), (q2 q3) form the two ququarts.
"""
import json
import sys

import numpy as np
from pyscf import ao2mo, gto, mcscf, scf

BOND = 1.5949  # angstrom, near equilibrium

mol = gto.M(atom=f"Li 0 0 0; H 0 0 {BOND}", basis="sto-3g", verbose=0)
mf = scf.RHF(mol).run()
cas = mcscf.CASCI(mf, 2, 2)
h1, ecore = cas.get_h1eff()
h2 = ao2mo.restore(1, cas.get_h2eff(), 2)

n = 4
I2 = np.eye(2)
Z = np.diag([1.0, -1.0])
lower = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|: occupied -> empty


def annihilate(p):
    ops = [Z] * p + [lower] + [I2] * (n - p - 1)
    out = np.array([[1.0]])
    for o in ops:
        out = np.kron(out, o)
    return out


a = [annihilate(p) for p in range(n)]
ad = [x.T.conj() for x in a]
H = ecore * np.eye(2**n)
for p in range(n):
    for q in range(n):
        if p % 2 == q % 2:
            H += h1[p // 2, q // 2] * ad[p] @ a[q]
for p in range(n):
    for q in range(n):
        for r in range(n):
            for s in range(n):
                if p % 2 == s % 2 and q % 2 == r % 2:
                    # chemist notation (ps|qr)
                    H += 0.5 * h2[p // 2, s // 2, q // 2, r // 2] * ad[p] @ ad[q] @ a[r] @ a[s]

assert np.allclose(H, H.conj().T)
rows = [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in H]
out = sys.argv[1] if len(sys.argv) > 1 else "data/lih_sto3g_4q.json"
with open(out, "w") as f:
    json.dump(rows, f, indent=1)
print("ground energy", np.linalg.eigvalsh(H)[0], "casci", cas.kernel()[0])
