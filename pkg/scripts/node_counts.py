"""Print the quadrature node counts for the strong-study meshes (experiment calibration)."""
import math

from sincfem.quadrature import build_grid, calibrate_k

MESHES = {1: (128, 256, 512, 1024), 2: (32, 64, 128, 256), 3: (10, 20, 40)}
BETAS = (3 / 8, 4 / 8, 5 / 8, 6 / 8, 7 / 8)


def main():
    print(f"{'d':>2} {'N_h':>6} " + " ".join(f"{b:>6.3f}" for b in BETAS))
    for dim, ns in MESHES.items():
        for n in ns:
            h = math.sqrt(dim) / n
            cells = []
            for beta in BETAS:
                if 4 * beta <= dim:
                    cells.append(f"{'-':>6}")
                else:
                    grid = build_grid(beta, calibrate_k(h, beta, dim, "experiment"))
                    cells.append(f"{grid.node_count:>6}")
            print(f"{dim:>2} {(n - 1) ** dim:>6} " + " ".join(cells))


if __name__ == "__main__":
    main()
