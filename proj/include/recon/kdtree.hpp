#pragma once

#include <algorithm>
#include <vector>

#include "recon/core.hpp"

namespace recon {

// Exact nearest-neighbor kd-tree over 3D points (median split, widest axis).
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
        idx_.resize(pts_.size());
        for (size_t i = 0; i < idx_.size(); ++i) idx_[i] = uint32_t(i);
        nodes_.reserve(pts_.size());
        if (!pts_.empty()) root_ = build(0, uint32_t(pts_.size()));
    }

    size_t size() const { return pts_.size(); }
    const Vec3& point(size_t i) const { return pts_[i]; }

    // (index into the original points, squared distance)
    std::pair<uint32_t, Real> nearest(const Vec3& q) const {
        Best best{UINT32_MAX, std::numeric_limits<Real>::max()};
        search(root_, q, best);
        return {best.index, best.dist2};
    }

private:
    struct Node {
        uint32_t begin, end;       // leaf range into idx_
        int32_t left = -1, right = -1;
        int axis = 0;
        Real split = 0;
    };
    struct Best {
        uint32_t index;
        Real dist2;
    };

    static constexpr uint32_t kLeafSize = 16;

    std::vector<Vec3> pts_;
    std::vector<uint32_t> idx_;
    std::vector<Node> nodes_;
    int32_t root_ = -1;

    int32_t build(uint32_t begin, uint32_t end) {
        Node node;
        node.begin = begin;
        node.end = end;
        if (end - begin > kLeafSize) {
            Aabb box;
            for (uint32_t i = begin; i < end; ++i) box.expand(pts_[idx_[i]]);
            Vec3 ext = box.extent();
            int axis = 0;
            if (ext.y > ext[axis]) axis = 1;
            if (ext.z > ext[axis]) axis = 2;
            uint32_t mid = (begin + end) / 2;
            std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                             [&](uint32_t a, uint32_t b) {
                                 return pts_[a][axis] < pts_[b][axis];
                             });
            node.axis = axis;
            node.split = pts_[idx_[mid]][axis];
            int32_t self = int32_t(nodes_.size());
            nodes_.push_back(node);
            int32_t l = build(begin, mid);
            int32_t r = build(mid, end);
            nodes_[self].left = l;
            nodes_[self].right = r;
            return self;
        }
        nodes_.push_back(node);
        return int32_t(nodes_.size() - 1);
    }

    void search(int32_t ni, const Vec3& q, Best& best) const {
        const Node& node = nodes_[ni];
        if (node.left < 0) {
            for (uint32_t i = node.begin; i < node.end; ++i) {
                Real d2 = (pts_[idx_[i]] - q).squared_norm();
                if (d2 < best.dist2) best = {idx_[i], d2};
            }
            return;
        }
        Real delta = q[node.axis] - node.split;
        int32_t near = delta < 0 ? node.left : node.right;
        int32_t far = delta < 0 ? node.right : node.left;
        search(near, q, best);
        if (delta * delta < best.dist2) search(far, q, best);
    }
};

}  // namespace recon
