use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array3;

use crate::{DataError, ImageArray, MultiDomainDataset};

/// Loads a folder-structured dataset (`root/<domain>/<class>/<file>`),
/// resizing every image to 32x32 RGB. Domain and class order are
/// lexicographic; labels are assigned by class-name rank.
pub fn load_folder_dataset(root: &Path) -> Result<MultiDomainDataset, DataError> {
    load_folder_dataset_with_size(root, 32)
}

pub fn load_folder_dataset_with_size(
    root: &Path,
    image_size: usize,
) -> Result<MultiDomainDataset, DataError> {
    let domains = sorted_subdirs(root)?;
    if domains.is_empty() {
        return Err(DataError::Ingestion(format!(
            "no domain directories under {}",
            root.display()
        )));
    }

    // class sets must be identical across domains
    let mut class_names: Option<Vec<String>> = None;
    for domain in &domains {
        let classes: BTreeSet<String> = sorted_subdirs(&root.join(domain))?.into_iter().collect();
        match &class_names {
            None => class_names = Some(classes.into_iter().collect()),
            Some(reference) => {
                let reference_set: BTreeSet<String> = reference.iter().cloned().collect();
                if classes != reference_set {
                    return Err(DataError::Ingestion(format!(
                        "domain '{domain}' has class set {:?}, expected {:?}",
                        classes, reference_set
                    )));
                }
            }
        }
    }
    let class_names = class_names.unwrap();
    if class_names.is_empty() {
        return Err(DataError::Ingestion("no class directories found".into()));
    }

    let mut examples = Vec::with_capacity(domains.len());
    for domain in &domains {
        let mut per_domain = Vec::new();
        for (label, class) in class_names.iter().enumerate() {
            let class_dir = root.join(domain).join(class);
            let mut files: Vec<_> = std::fs::read_dir(&class_dir)
                .map_err(|e| DataError::Ingestion(format!("{}: {e}", class_dir.display())))?
                .filter_map(|entry| entry.ok())
                .map(|entry| entry.path())
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            for file in files {
                per_domain.push((load_image(&file, image_size)?, label));
            }
        }
        examples.push(per_domain);
    }

    let dataset = MultiDomainDataset {
        domains,
        examples,
        num_classes: class_names.len(),
    };
    dataset.validate()?;
    Ok(dataset)
}

fn sorted_subdirs(path: &Path) -> Result<Vec<String>, DataError> {
    let entries = std::fs::read_dir(path)
        .map_err(|e| DataError::Ingestion(format!("{}: {e}", path.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_dir())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .collect();
    names.sort();
    Ok(names)
}

fn load_image(path: &Path, image_size: usize) -> Result<ImageArray, DataError> {
    let img = image::open(path)
        .map_err(|e| DataError::Ingestion(format!("{}: {e}", path.display())))?
        .resize_exact(
            image_size as u32,
            image_size as u32,
            image::imageops::FilterType::Triangle,
        )
        .to_rgb8();
    let mut pixels = Array3::<f32>::zeros((image_size, image_size, 3));
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            pixels[[y as usize, x as usize, c]] = px[c] as f32 / 255.0;
        }
    }
    Ok(ImageArray::new_clipped(pixels))
}
