use super::*;
use crate::euler::{EulerOptions, EulerSolver, Reconstruction};
use crate::poisson::{EllipticSolveOptions, LaplacianStencil};

fn trajectory() -> Trajectory {
    let grid = SpatialGrid::new(1, 8, 1.0).unwrap();
    let solver = EulerSolver::new(
        &grid,
        &EulerOptions {
            reconstruction: Reconstruction::VanLeer,
            cfl: 0.5,
            elliptic: EllipticSolveOptions {
                newton_tol: 1e-11,
                max_newton: 30,
                krylov_tol: 1e-12,
                max_krylov: 200,
                stencil: LaplacianStencil::Centered,
            },
        },
    )
    .unwrap();
    let init = solver.init_irrotational(0.05, &[[1, 0, 0]], 1.0, 0.5).unwrap();
    solver.run(&init, 0.05, 1).unwrap()
}

#[test]
fn trajectories_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let traj = trajectory();
    let written = write_trajectory(dir.path(), "trajectory", &traj).unwrap();
    let (back, manifest) = read_trajectory(&dir.path().join("trajectory.json")).unwrap();
    assert_eq!(back, traj);
    assert_eq!(manifest, written);
    assert_eq!(manifest.sha256.len(), 64);
}

#[test]
fn tampered_dumps_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), "trajectory", &trajectory()).unwrap();
    let path = dir.path().join("trajectory.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes[3] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(read_trajectory(&dir.path().join("trajectory.json")), Err(Error::Format { .. })));
}

#[test]
fn trajectory_csv_has_one_row_per_time_and_cell() {
    let dir = tempfile::tempdir().unwrap();
    let traj = trajectory();
    let path = dir.path().join("t.csv");
    write_trajectory_csv(&path, &traj).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,cell,rho,u_x,u_y,u_z,theta,phi");
    assert_eq!(lines.count(), traj.times.len() * 8);
}

#[test]
fn f64_dumps_are_little_endian() {
    let bytes = encode_f64s(&[1.0, -2.5]);
    assert_eq!(&bytes[..8], &1.0f64.to_le_bytes());
    assert_eq!(decode_f64s(&bytes).unwrap(), vec![1.0, -2.5]);
    assert!(decode_f64s(&bytes[..7]).is_err());
    assert_eq!(
        sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
