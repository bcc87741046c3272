"""Build a feature-map circuit, inspect its state, and compare exact and sampled kernels.

Run with ``python demos/01_circuits_and_kernels.py``.
"""
import numpy as np

from brainqml.circuits import FeatureMapSpec, zz_feature_map
from brainqml.kernel_svm import quantum_kernel_exact, quantum_kernel_sampled
from brainqml.qsim import run_exact, sample


def main():
    fmap = FeatureMapSpec(n_qubits=3, depth=2)
    x = np.array([0.4, 1.9, 2.7])
    circuit = zz_feature_map(fmap, x)
    print(f"feature map on {fmap.n_qubits} qubits: {len(circuit.gates)} gates")

    state = run_exact(circuit)
    probs = state.probabilities()
    top = np.argsort(probs)[::-1][:3]
    for i in top:
        print(f"  |{i:03b}>  p = {probs[i]:.4f}")

    counts = sample(circuit, None, shots=2000, seed=1)
    print(f"2000 shots, most frequent: {max(counts.entries, key=counts.entries.get)}")

    # kernel entries are overlaps |<phi(y)|phi(x)>|^2
    rng = np.random.default_rng(0)
    A = rng.uniform(0, np.pi, (6, 3))
    exact = quantum_kernel_exact(A, A, fmap).values
    for shots in (256, 1024, 16384):
        est = quantum_kernel_sampled(A, A, fmap, shots=shots, seed=2).values
        print(f"shots {shots:>6}: max |K_sampled - K_exact| = {np.max(np.abs(est - exact)):.4f}")
    print(f"smallest eigenvalue of the exact kernel: {np.linalg.eigvalsh(exact).min():.2e}")


if __name__ == "__main__":
    main()
