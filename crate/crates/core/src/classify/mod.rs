//! Stratified splitting and one-vs-rest SVM classification.

mod cache;
mod smo;
mod split;
mod svm;

pub use split::{stratified_split, stratified_subsample, SplitIndices, DEFAULT_TRAIN_FRACTION};
pub use svm::{
    default_gamma, svm_predict, svm_predict_with, svm_train, svm_train_with, BinaryModel, Kernel,
    KernelSpec, SvmConfig, SvmModel,
};
