//! Python bindings for `limtomo`.
//!
//! Images and sinograms cross the boundary as flat row-major lists of floats;
//! row 0 is the bottom of the image (smallest y).

use std::sync::Arc;

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use limtomo::experiments::{self, NoiseSpec, Phantom};
use limtomo::radon as rt;
use limtomo::visibility::{extract_range, invisible_indices};
use limtomo::{
    AngularRange, CoeffSet, CurveletIndex, Error, FbpFilter, ForwardOperator, RadonGeometry, SolverConfig,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Index(m) | Error::UnsupportedIndex(m) => PyIndexError::new_err(m),
        Error::Unstable { .. } | Error::State(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Image", frozen)]
struct PyImage {
    inner: limtomo::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<f64>) -> PyResult<Self> {
        Ok(PyImage { inner: limtomo::Image::new(width, height, pixels).map_err(to_py)? })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn pixels(&self) -> Vec<f64> {
        self.inner.pixels.clone()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width, self.inner.height)
    }
}

#[pyclass(name = "Sinogram", frozen)]
struct PySinogram {
    inner: limtomo::Sinogram,
}

#[pymethods]
impl PySinogram {
    /// projection angles in degrees
    #[getter]
    fn angles_deg(&self) -> Vec<f64> {
        self.inner.angles.iter().map(|a| a.to_degrees()).collect()
    }

    #[getter]
    fn offsets(&self) -> Vec<f64> {
        self.inner.offsets.clone()
    }

    /// angle-major samples, `len(angles) * len(offsets)` values
    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples.clone()
    }

    fn row(&self, m: usize) -> PyResult<Vec<f64>> {
        if m >= self.inner.angles.len() {
            return Err(PyIndexError::new_err(format!("angle {m} out of range")));
        }
        Ok(self.inner.row(m).to_vec())
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn __repr__(&self) -> String {
        format!("Sinogram({} angles x {} offsets)", self.inner.angles.len(), self.inner.offsets.len())
    }
}

#[pyclass(name = "CurveletSystem", frozen)]
struct PyCurveletSystem {
    inner: Arc<limtomo::CurveletSystem>,
}

#[pymethods]
impl PyCurveletSystem {
    #[new]
    #[pyo3(signature = (width, height, num_scales=None))]
    fn new(width: usize, height: usize, num_scales: Option<usize>) -> PyResult<Self> {
        let j = num_scales.unwrap_or_else(|| limtomo::curvelet::default_scales(width, height));
        Ok(PyCurveletSystem { inner: Arc::new(limtomo::CurveletSystem::build(width, height, j).map_err(to_py)?) })
    }

    #[getter]
    fn num_scales(&self) -> usize {
        self.inner.num_scales
    }

    #[getter]
    fn num_coefficients(&self) -> usize {
        self.inner.num_coefficients()
    }

    /// frame coefficients as a flat list
    fn analysis(&self, image: &PyImage) -> PyResult<Vec<f64>> {
        Ok(self.inner.analysis(&image.inner).map_err(to_py)?.data)
    }

    fn synthesis(&self, coeffs: Vec<f64>) -> PyResult<PyImage> {
        let c = CoeffSet::from_vec(&self.inner, coeffs).map_err(to_py)?;
        Ok(PyImage { inner: self.inner.synthesis(&c).map_err(to_py)? })
    }

    /// flat position of index `(j, l, k1, k2)`; `j = -1` is the low-pass
    fn flat_index(&self, j: i32, l: i32, k1: i32, k2: i32) -> PyResult<usize> {
        self.inner.flat_index(&CurveletIndex::new(j, l, (k1, k2))).map_err(to_py)
    }

    fn curvelet_image(&self, j: i32, l: i32, k1: i32, k2: i32) -> PyResult<PyImage> {
        Ok(PyImage { inner: self.inner.curvelet_image(&CurveletIndex::new(j, l, (k1, k2))).map_err(to_py)? })
    }

    /// Visible and invisible coefficient counts for `[center - half, center + half]`, degrees.
    fn partition(&self, center_deg: f64, half_width_deg: f64) -> PyResult<(usize, usize)> {
        let range = AngularRange::from_degrees(center_deg, half_width_deg).map_err(to_py)?;
        let p = invisible_indices(&self.inner, &range).map_err(to_py)?;
        Ok((p.visible_count(), p.invisible_count()))
    }

    /// `(j, l)` orientations with no visible coefficient.
    fn invisible_orientations(&self, center_deg: f64, half_width_deg: f64) -> PyResult<Vec<(i32, i32)>> {
        let range = AngularRange::from_degrees(center_deg, half_width_deg).map_err(to_py)?;
        Ok(invisible_indices(&self.inner, &range).map_err(to_py)?.invisible_orientations())
    }

    fn __repr__(&self) -> String {
        format!("CurveletSystem({}x{}, {} scales)", self.inner.width, self.inner.height, self.inner.num_scales)
    }
}

#[pyfunction]
fn phantom(kind: &str, size: usize) -> PyResult<PyImage> {
    let kind: Phantom = kind.parse().map_err(to_py)?;
    Ok(PyImage { inner: experiments::make_phantom(&kind, size).map_err(to_py)? })
}

#[pyfunction]
fn radon(image: &PyImage, angles_deg: Vec<f64>) -> PyResult<PySinogram> {
    let f = &image.inner;
    let geom = RadonGeometry::from_degrees(&angles_deg, f.width, f.height).map_err(to_py)?;
    Ok(PySinogram { inner: rt::radon(f, &geom).map_err(to_py)? })
}

#[pyfunction]
fn backprojection(sinogram: &PySinogram, width: usize, height: usize) -> PyResult<PyImage> {
    Ok(PyImage { inner: rt::backprojection(&sinogram.inner, width, height, 1.0).map_err(to_py)? })
}

#[pyfunction]
#[pyo3(signature = (sinogram, level, seed=42))]
fn add_noise(sinogram: &PySinogram, level: f64, seed: u64) -> PyResult<(PySinogram, f64)> {
    let (g, sigma) = experiments::add_noise(&sinogram.inner, &NoiseSpec { level, seed }).map_err(to_py)?;
    Ok((PySinogram { inner: g }, sigma))
}

#[pyfunction]
#[pyo3(signature = (sinogram, size, filter="ram-lak", cutoff=1.0))]
fn fbp(sinogram: &PySinogram, size: usize, filter: &str, cutoff: f64) -> PyResult<PyImage> {
    let filter = FbpFilter::new(filter.parse().map_err(to_py)?, cutoff).map_err(to_py)?;
    Ok(PyImage { inner: rt::fbp(&sinogram.inner, size, size, 1.0, &filter).map_err(to_py)? })
}

/// CSR, or A-CSR with `reduced=True`, with the adaptive threshold schedule.
#[pyfunction]
#[pyo3(signature = (system, sinogram, reduced=false, iters=100))]
fn reconstruct(
    py: Python<'_>,
    system: &PyCurveletSystem,
    sinogram: &PySinogram,
    reduced: bool,
    iters: usize,
) -> PyResult<(PyImage, Vec<f64>)> {
    let g = &sinogram.inner;
    let geom = RadonGeometry::of_sinogram(g).map_err(to_py)?;
    let sys = system.inner.clone();
    let part = if reduced {
        let range = extract_range(&g.angles).map_err(to_py)?;
        Some(invisible_indices(&sys, &range).map_err(to_py)?)
    } else {
        None
    };
    let cfg = SolverConfig { max_iter: iters, ..Default::default() };
    let rec = py
        .detach(|| ForwardOperator::new(sys, geom, part).and_then(|op| limtomo::solver::reconstruct(&op, g, &cfg)))
        .map_err(to_py)?;
    Ok((PyImage { inner: rec.image }, rec.coeffs.data))
}

#[pyfunction]
fn psnr(reference: &PyImage, image: &PyImage) -> PyResult<f64> {
    experiments::psnr(&reference.inner, &image.inner).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "limtomo")]
fn limtomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PySinogram>()?;
    m.add_class::<PyCurveletSystem>()?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(radon, m)?)?;
    m.add_function(wrap_pyfunction!(backprojection, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(fbp, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    Ok(())
}
