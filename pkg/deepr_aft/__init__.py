from deepr_aft.constants import VERSION as __version__
