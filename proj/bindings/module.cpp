void finegrain_binding_placeholder();
