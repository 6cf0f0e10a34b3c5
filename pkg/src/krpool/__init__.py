"""Kernelized rank pooling of temporally ordered feature sequences."""

from .classify import GramModel, evaluate, predict, train
from .descriptors import PreimageDescriptor, SubspaceDescriptor
from .grasskernel import gram_descriptors, preimage_similarity, subspace_similarity
from .kernel import KernelMatrix, bandwidth, cross_gram, gram, rbf
from .krpfs import KrpfsParams, kpca_oracle, krpfs_eucgrad, krpfs_fit, krpfs_objective
from .linrank import RankParams, avg_pool, rp_fit, rp_objective
from .preimage import PreimageParams, bkrp_objective, ibkrp_objective, preimage_fit, preimage_grad
from .seqdata import LabeledDataset, Sequence, SynthSpec, load_manifest, load_sequence, synth_dataset

__version__ = "0.1.0"
