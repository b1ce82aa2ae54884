"""
A complete low-dose simulation pipeline
=======================================

Phantom -> projections -> photon noise -> view subsampling -> FDK.
This mirrors what the `cbct` command line does, but in-process:

    cbct phantom --grid 48 --seed 11 --out head.vol
    cbct project --vol head.vol --views 120 --out head.prj
    cbct simulate --proj head.prj --i0 1e5 --out noisy.prj
    cbct subsample --proj noisy.prj --keep-every 5 --out sparse.prj
    cbct fdk --proj sparse.prj --grid 48 --out recon.vol
    cbct metrics --test recon.vol --ref head.vol
"""

import math

import cbct

grid = cbct.VoxelGrid(48, 48, 48, voxel_size=0.3)

# randomized dental phantom: head ellipsoid, jaw arch, individual teeth
spec, truth = cbct.dental_phantom(grid, seed=11)
teeth = sum(e.label == "tooth" for e in spec.ellipsoids)
print(f"phantom has {len(spec.ellipsoids)} ellipsoids ({teeth} teeth)")

geom = cbct.make_circular_geometry(
    n_views=120, arc_span=2 * math.pi, sid=60.0, sdd=100.0,
    n_rows=64, n_cols=64, pitch_u=0.4, pitch_v=0.4)

clean = cbct.forward_project(truth, geom)

# Beer-Lambert photon statistics at 1e5 photons per ray, then back to
# line integrals (zero-count rays clamp to the maximum measurable value)
counts = cbct.simulate_counts(clean, i0=1e5, seed=1)
noisy = cbct.counts_to_line_integrals(counts, i0=1e5)

# normal-dose reconstruction uses every view
normal = cbct.fdk_reconstruct(noisy, grid)

# the low-dose protocol keeps every 5th view only
sparse = cbct.subsample_views(noisy, keep_every=5)
low = cbct.fdk_reconstruct(sparse, grid)
print(f"normal dose: {noisy.geom.n_views} views, "
      f"low dose: {sparse.geom.n_views} views")

for name, rec in [("normal", normal), ("low   ", low)]:
    rep = cbct.evaluate(rec, truth)
    print(f"{name}  nrmse {rep.nrmse:.4f}  psnr {rep.psnr:6.2f}  "
          f"ssim {rep.ssim:.4f}")
